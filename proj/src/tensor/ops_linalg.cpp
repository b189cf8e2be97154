#include "op_util.hpp"
#include "vpf/kernels.hpp"

namespace vpf {
namespace {

// Flat batch offsets (in matrices) of a and b for each broadcast output batch.
struct BatchMap {
  Shape out_batch;
  std::vector<int64_t> a_index;
  std::vector<int64_t> b_index;
};

BatchMap map_batches(const Shape& a_batch, const Shape& b_batch) {
  BatchMap m;
  m.out_batch = a_batch.empty() && b_batch.empty() ? Shape{} : broadcast_shapes(
      a_batch.empty() ? Shape{1} : a_batch, b_batch.empty() ? Shape{1} : b_batch);
  const int64_t n = shape_numel(m.out_batch);
  const size_t r = m.out_batch.size();
  auto strides = [&](const Shape& s) {
    std::vector<int64_t> st(r, 0);
    int64_t acc = 1;
    for (size_t i = 0; i < s.size(); ++i) {
      const size_t si = s.size() - 1 - i;
      const size_t oi = r - 1 - i;
      st[oi] = s[si] == 1 ? 0 : acc;
      acc *= s[si];
    }
    return st;
  };
  const auto sa = strides(a_batch);
  const auto sb = strides(b_batch);
  std::vector<int64_t> idx(r, 0);
  for (int64_t i = 0; i < n; ++i) {
    int64_t oa = 0, ob = 0;
    for (size_t d = 0; d < r; ++d) {
      oa += idx[d] * sa[d];
      ob += idx[d] * sb[d];
    }
    m.a_index.push_back(oa);
    m.b_index.push_back(ob);
    for (size_t d = r; d-- > 0;) {
      if (++idx[d] < m.out_batch[d]) break;
      idx[d] = 0;
    }
  }
  if (n == 0 || r == 0) {
    m.a_index = {0};
    m.b_index = {0};
  }
  return m;
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  detail::require_same_dtype(a, b, "matmul");
  if (a.rank() < 2 || b.rank() < 2) {
    throw ShapeError("matmul needs rank >= 2 operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const int64_t m = a.dim(-2), k = a.dim(-1), k2 = b.dim(-2), n = b.dim(-1);
  if (k != k2) {
    throw ShapeError("matmul inner dimensions differ: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  }
  const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
  BatchMap bm;
  try {
    bm = map_batches(a_batch, b_batch);
  } catch (const ShapeError&) {
    throw ShapeError("matmul batch dimensions not broadcastable: " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  }
  Shape out_shape = bm.out_batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out(out_shape, a.dtype());
  visit_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* ap = a.value().data<T>();
    const T* bp = b.value().data<T>();
    T* cp = out.mutable_data<T>();
    for (size_t i = 0; i < bm.a_index.size(); ++i) {
      kernels::gemm(false, false, m, n, k, T(1), ap + bm.a_index[i] * m * k, k,
                    bp + bm.b_index[i] * k * n, n, T(0), cp + static_cast<int64_t>(i) * m * n, n);
    }
  });
  return make_result(std::move(out), {a, b}, [a, b, bm, m, n, k](const Tensor& g) {
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* gp = g.data<T>();
      if (a.requires_grad()) {
        Tensor ga(a.shape(), g.dtype());
        T* o = ga.mutable_data<T>();
        const T* bp = b.value().data<T>();
        for (size_t i = 0; i < bm.a_index.size(); ++i) {
          kernels::gemm(false, true, m, k, n, T(1), gp + static_cast<int64_t>(i) * m * n, n,
                        bp + bm.b_index[i] * k * n, n, T(1), o + bm.a_index[i] * m * k, k);
        }
        accumulate_grad(a, ga);
      }
      if (b.requires_grad()) {
        Tensor gb(b.shape(), g.dtype());
        T* o = gb.mutable_data<T>();
        const T* ap = a.value().data<T>();
        for (size_t i = 0; i < bm.a_index.size(); ++i) {
          kernels::gemm(true, false, k, n, m, T(1), ap + bm.a_index[i] * m * k, k,
                        gp + static_cast<int64_t>(i) * m * n, n, T(1), o + bm.b_index[i] * k * n, n);
        }
        accumulate_grad(b, gb);
      }
    });
  });
}

Var linear(const Var& x, const Var& w, const Var& bias) {
  detail::require_same_dtype(x, w, "linear");
  if (w.rank() != 2 || x.dim(-1) != w.dim(0)) {
    throw ShapeError("linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                     shape_str(w.shape()));
  }
  const int64_t in = w.dim(0), outf = w.dim(1);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != outf)) {
    throw ShapeError("linear: bias " + shape_str(bias.shape()) + " for " + std::to_string(outf) +
                     " outputs");
  }
  const int64_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = outf;
  Tensor out(out_shape, x.dtype());
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    T* y = out.mutable_data<T>();
    T beta = T(0);
    if (bias.defined()) {
      const T* bp = bias.value().data<T>();
      for (int64_t r = 0; r < rows; ++r) std::copy(bp, bp + outf, y + r * outf);
      beta = T(1);
    }
    kernels::gemm(false, false, rows, outf, in, T(1), x.value().data<T>(), in,
                  w.value().data<T>(), outf, beta, y, outf);
  });
  std::vector<Var> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [x, w, bias, rows, in, outf](const Tensor& g) {
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* gp = g.data<T>();
      if (x.requires_grad()) {
        Tensor gx(x.shape(), g.dtype());
        kernels::gemm(false, true, rows, in, outf, T(1), gp, outf, w.value().data<T>(), outf,
                      T(0), gx.mutable_data<T>(), in);
        accumulate_grad(x, gx);
      }
      if (w.requires_grad()) {
        Tensor gw(w.shape(), g.dtype());
        kernels::gemm(true, false, in, outf, rows, T(1), x.value().data<T>(), in, gp, outf,
                      T(0), gw.mutable_data<T>(), outf);
        accumulate_grad(w, gw);
      }
      if (bias.defined() && bias.requires_grad()) {
        Tensor gbias(bias.shape(), g.dtype());
        detail::add_column_sums(gp, rows, outf, gbias.mutable_data<T>());
        accumulate_grad(bias, gbias);
      }
    });
  });
}

}  // namespace vpf
