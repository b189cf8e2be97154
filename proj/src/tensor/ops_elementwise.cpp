#include <algorithm>
#include <cmath>

#include "op_util.hpp"
#include "vpf/kernels.hpp"

namespace vpf {
namespace detail {

template <class T>
void add_column_sums(const T* src, int64_t rows, int64_t cols, T* out) {
  for (int64_t r = 0; r < rows; ++r) kernels::axpy(cols, T(1), src + r * cols, out);
}
template void add_column_sums<float>(const float*, int64_t, int64_t, float*);
template void add_column_sums<double>(const double*, int64_t, int64_t, double*);

namespace {

// Strides of `in` aligned to the rank of `out`, zero on broadcast axes.
std::vector<int64_t> aligned_strides(const Shape& in, const Shape& out) {
  const size_t r = out.size();
  std::vector<int64_t> st(r, 0);
  int64_t s = 1;
  for (size_t i = 0; i < in.size(); ++i) {
    const size_t ii = in.size() - 1 - i;
    const size_t oi = r - 1 - i;
    st[oi] = in[ii] == 1 && out[oi] != 1 ? 0 : s;
    s *= in[ii];
  }
  return st;
}

// Visits every output element with the matching flat offsets into a and b.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<int64_t>& sa,
                        const std::vector<int64_t>& sb, F&& f) {
  const size_t r = out.size();
  std::vector<int64_t> idx(r, 0);
  const int64_t n = shape_numel(out);
  int64_t oa = 0, ob = 0;
  for (int64_t i = 0; i < n; ++i) {
    f(i, oa, ob);
    for (size_t d = r; d-- > 0;) {
      if (++idx[d] < out[d]) {
        oa += sa[d];
        ob += sb[d];
        break;
      }
      oa -= sa[d] * (out[d] - 1);
      ob -= sb[d] * (out[d] - 1);
      idx[d] = 0;
    }
  }
}

}  // namespace

Tensor reduce_to_shape(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  Tensor out(target, g.dtype());
  visit_dtype(g.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* gp = g.data<T>();
    T* op = out.mutable_data<T>();
    const int64_t tn = out.numel();
    // Suffix broadcast: g is [rows, tn].
    bool suffix = target.size() <= g.shape().size();
    for (size_t i = 0; suffix && i < target.size(); ++i) {
      suffix = target[target.size() - 1 - i] == g.shape()[g.shape().size() - 1 - i];
    }
    if (suffix) {
      add_column_sums(gp, g.numel() / tn, tn, op);
      return;
    }
    const auto st = aligned_strides(target, g.shape());
    const std::vector<int64_t> zero(st.size(), 0);
    for_each_broadcast(g.shape(), st, zero, [&](int64_t i, int64_t oa, int64_t) { op[oa] += gp[i]; });
  });
  return out;
}

}  // namespace detail

Shape broadcast_shapes(const Shape& a, const Shape& b) {
  const size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (size_t i = 0; i < r; ++i) {
    const int64_t ea = i < a.size() ? a[a.size() - 1 - i] : 1;
    const int64_t eb = i < b.size() ? b[b.size() - 1 - i] : 1;
    if (ea != eb && ea != 1 && eb != 1) {
      throw ShapeError("cannot broadcast shapes " + shape_str(a) + " and " + shape_str(b));
    }
    out[r - 1 - i] = std::max(ea, eb);
  }
  return out;
}

namespace {

enum class BinOp { add, sub, mul };

template <class T>
void binary_kernel(BinOp op, const Tensor& a, const Tensor& b, Tensor& out) {
  const T* ap = a.data<T>();
  const T* bp = b.data<T>();
  T* op_ = out.mutable_data<T>();
  const int64_t n = out.numel();
  if (a.shape() == b.shape()) {
    switch (op) {
      case BinOp::add: kernels::add(n, ap, bp, op_); return;
      case BinOp::mul: kernels::mul(n, ap, bp, op_); return;
      case BinOp::sub:
        for (int64_t i = 0; i < n; ++i) op_[i] = ap[i] - bp[i];
        return;
    }
  }
  const auto sa = detail::aligned_strides(a.shape(), out.shape());
  const auto sb = detail::aligned_strides(b.shape(), out.shape());
  detail::for_each_broadcast(out.shape(), sa, sb, [&](int64_t i, int64_t oa, int64_t ob) {
    switch (op) {
      case BinOp::add: op_[i] = ap[oa] + bp[ob]; break;
      case BinOp::sub: op_[i] = ap[oa] - bp[ob]; break;
      case BinOp::mul: op_[i] = ap[oa] * bp[ob]; break;
    }
  });
}

Var binary(BinOp op, const Var& a, const Var& b, const char* name) {
  detail::require_same_dtype(a, b, name);
  const Shape out_shape = broadcast_shapes(a.shape(), b.shape());
  Tensor out(out_shape, a.dtype());
  visit_dtype(a.dtype(), [&](auto tag) { binary_kernel<decltype(tag)>(op, a.value(), b.value(), out); });
  return make_result(std::move(out), {a, b}, [a, b, op](const Tensor& g) {
    if (op == BinOp::mul) {
      if (a.requires_grad()) {
        Tensor ga(g.shape(), g.dtype());
        visit_dtype(g.dtype(), [&](auto tag) { binary_kernel<decltype(tag)>(BinOp::mul, g, b.value(), ga); });
        accumulate_grad(a, detail::reduce_to_shape(ga, a.shape()));
      }
      if (b.requires_grad()) {
        Tensor gb(g.shape(), g.dtype());
        visit_dtype(g.dtype(), [&](auto tag) { binary_kernel<decltype(tag)>(BinOp::mul, g, a.value(), gb); });
        accumulate_grad(b, detail::reduce_to_shape(gb, b.shape()));
      }
      return;
    }
    if (a.requires_grad()) accumulate_grad(a, detail::reduce_to_shape(g, a.shape()));
    if (b.requires_grad()) {
      Tensor gb = detail::reduce_to_shape(g, b.shape());
      if (op == BinOp::sub) {
        Tensor neg(gb.shape(), gb.dtype());
        visit_dtype(gb.dtype(), [&](auto tag) {
          using T = decltype(tag);
          kernels::scale(gb.numel(), T(-1), gb.data<T>(), neg.mutable_data<T>());
        });
        gb = neg;
      }
      accumulate_grad(b, gb);
    }
  });
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary(BinOp::add, a, b, "add"); }
Var sub(const Var& a, const Var& b) { return binary(BinOp::sub, a, b, "sub"); }
Var mul(const Var& a, const Var& b) { return binary(BinOp::mul, a, b, "mul"); }

Var scale(const Var& a, double s) {
  Tensor out(a.shape(), a.dtype());
  visit_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    kernels::scale(a.numel(), static_cast<T>(s), a.value().data<T>(), out.mutable_data<T>());
  });
  return make_result(std::move(out), {a}, [a, s](const Tensor& g) {
    Tensor ga(g.shape(), g.dtype());
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      kernels::scale(g.numel(), static_cast<T>(s), g.data<T>(), ga.mutable_data<T>());
    });
    accumulate_grad(a, ga);
  });
}

Var relu(const Var& a) {
  Tensor out(a.shape(), a.dtype());
  visit_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    kernels::relu(a.numel(), a.value().data<T>(), out.mutable_data<T>());
  });
  return make_result(std::move(out), {a}, [a](const Tensor& g) {
    Tensor ga(g.shape(), g.dtype());
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      kernels::relu_backward(g.numel(), a.value().data<T>(), g.data<T>(), ga.mutable_data<T>());
    });
    accumulate_grad(a, ga);
  });
}

Var sigmoid(const Var& a) {
  Tensor out(a.shape(), a.dtype());
  visit_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* x = a.value().data<T>();
    T* y = out.mutable_data<T>();
    for (int64_t i = 0; i < a.numel(); ++i) {
      y[i] = x[i] >= 0 ? T(1) / (T(1) + std::exp(-x[i])) : std::exp(x[i]) / (T(1) + std::exp(x[i]));
    }
  });
  Tensor y = out;
  return make_result(std::move(out), {a}, [a, y](const Tensor& g) {
    Tensor ga(g.shape(), g.dtype());
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* yp = y.data<T>();
      const T* gp = g.data<T>();
      T* o = ga.mutable_data<T>();
      for (int64_t i = 0; i < g.numel(); ++i) o[i] = gp[i] * yp[i] * (T(1) - yp[i]);
    });
    accumulate_grad(a, ga);
  });
}

Var sum(const Var& a) {
  Tensor out({1}, a.dtype());
  visit_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    out.mutable_data<T>()[0] = kernels::sum(a.numel(), a.value().data<T>());
  });
  return make_result(std::move(out), {a}, [a](const Tensor& g) {
    accumulate_grad(a, Tensor::full(a.shape(), g.item(), g.dtype()));
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Var sum_over_axis(const Var& a, int axis) {
  const int ax = detail::normalize_axis(axis, a.rank(), "sum_over_axis");
  const auto sp = detail::split_at(a.shape(), ax);
  Shape out_shape = a.shape();
  out_shape.erase(out_shape.begin() + ax);
  if (out_shape.empty()) out_shape = {1};
  Tensor out(out_shape, a.dtype());
  visit_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* x = a.value().data<T>();
    T* y = out.mutable_data<T>();
    for (int64_t o = 0; o < sp.outer; ++o) {
      for (int64_t j = 0; j < sp.n; ++j) {
        kernels::axpy(sp.inner, T(1), x + (o * sp.n + j) * sp.inner, y + o * sp.inner);
      }
    }
  });
  return make_result(std::move(out), {a}, [a, sp](const Tensor& g) {
    Tensor ga(a.shape(), g.dtype());
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* gp = g.data<T>();
      T* o = ga.mutable_data<T>();
      for (int64_t oi = 0; oi < sp.outer; ++oi) {
        for (int64_t j = 0; j < sp.n; ++j) {
          std::copy(gp + oi * sp.inner, gp + (oi + 1) * sp.inner, o + (oi * sp.n + j) * sp.inner);
        }
      }
    });
    accumulate_grad(a, ga);
  });
}

Var mean_over_axis(const Var& a, int axis) {
  const int ax = detail::normalize_axis(axis, a.rank(), "mean_over_axis");
  return scale(sum_over_axis(a, ax), 1.0 / static_cast<double>(a.dim(ax)));
}

Var softmax(const Var& a, int axis) {
  const int ax = detail::normalize_axis(axis, a.rank(), "softmax");
  const auto sp = detail::split_at(a.shape(), ax);
  Tensor out(a.shape(), a.dtype());
  visit_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* x = a.value().data<T>();
    T* y = out.mutable_data<T>();
    for (int64_t o = 0; o < sp.outer; ++o) {
      for (int64_t i = 0; i < sp.inner; ++i) {
        const int64_t base = o * sp.n * sp.inner + i;
        T mx = x[base];
        for (int64_t j = 1; j < sp.n; ++j) mx = std::max(mx, x[base + j * sp.inner]);
        T s = 0;
        for (int64_t j = 0; j < sp.n; ++j) {
          const T e = std::exp(x[base + j * sp.inner] - mx);
          y[base + j * sp.inner] = e;
          s += e;
        }
        for (int64_t j = 0; j < sp.n; ++j) y[base + j * sp.inner] /= s;
      }
    }
  });
  Tensor y = out;
  return make_result(std::move(out), {a}, [a, y, sp](const Tensor& g) {
    Tensor ga(a.shape(), g.dtype());
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* yp = y.data<T>();
      const T* gp = g.data<T>();
      T* o = ga.mutable_data<T>();
      for (int64_t oi = 0; oi < sp.outer; ++oi) {
        for (int64_t i = 0; i < sp.inner; ++i) {
          const int64_t base = oi * sp.n * sp.inner + i;
          T dotp = 0;
          for (int64_t j = 0; j < sp.n; ++j) dotp += gp[base + j * sp.inner] * yp[base + j * sp.inner];
          for (int64_t j = 0; j < sp.n; ++j) {
            const int64_t q = base + j * sp.inner;
            o[q] = yp[q] * (gp[q] - dotp);
          }
        }
      }
    });
    accumulate_grad(a, ga);
  });
}

Var bce_with_logits(const Var& logits, const Tensor& labels) {
  if (labels.numel() != logits.numel()) {
    throw ShapeError("bce_with_logits: logits " + shape_str(logits.shape()) + " vs labels " +
                     shape_str(labels.shape()));
  }
  const Tensor y = labels.to(logits.dtype());
  const int64_t n = logits.numel();
  Tensor out({1}, logits.dtype());
  visit_dtype(logits.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* x = logits.value().data<T>();
    const T* t = y.data<T>();
    // Accumulate in double so f32 losses over large batches stay accurate.
    double s = 0;
    for (int64_t i = 0; i < n; ++i) {
      const double xi = x[i];
      s += std::max(xi, 0.0) - xi * t[i] + std::log1p(std::exp(-std::abs(xi)));
    }
    out.mutable_data<T>()[0] = static_cast<T>(s / static_cast<double>(n));
  });
  return make_result(std::move(out), {logits}, [logits, y, n](const Tensor& g) {
    Tensor gl(logits.shape(), g.dtype());
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* x = logits.value().data<T>();
      const T* t = y.data<T>();
      T* o = gl.mutable_data<T>();
      const T coeff = static_cast<T>(g.item() / static_cast<double>(n));
      for (int64_t i = 0; i < n; ++i) {
        const T s = x[i] >= 0 ? T(1) / (T(1) + std::exp(-x[i])) : std::exp(x[i]) / (T(1) + std::exp(x[i]));
        o[i] = coeff * (s - t[i]);
      }
    });
    accumulate_grad(logits, gl);
  });
}

}  // namespace vpf
