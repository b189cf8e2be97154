#include <algorithm>
#include <cstring>
#include <numeric>

#include "op_util.hpp"
#include "vpf/kernels.hpp"

namespace vpf {

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshape(std::move(shape));
  return make_result(out, {a}, [a](const Tensor& g) { accumulate_grad(a, g.reshape(a.shape())); });
}

namespace {

Tensor permute_tensor(const Tensor& x, const std::vector<int>& perm) {
  const int r = x.rank();
  Shape out_shape(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) out_shape[static_cast<size_t>(i)] = x.shape()[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  std::vector<int64_t> in_strides(static_cast<size_t>(r), 1);
  for (int i = r - 2; i >= 0; --i) {
    in_strides[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(i) + 1] * x.shape()[static_cast<size_t>(i) + 1];
  }
  // Input stride for each output axis.
  std::vector<int64_t> st(static_cast<size_t>(r));
  for (int i = 0; i < r; ++i) st[static_cast<size_t>(i)] = in_strides[static_cast<size_t>(perm[static_cast<size_t>(i)])];
  Tensor out(out_shape, x.dtype());
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* src = x.data<T>();
    T* dst = out.mutable_data<T>();
    // Copy contiguous runs when the trailing axis is kept in place.
    const bool last_kept = perm.back() == r - 1;
    const int64_t run = last_kept ? out_shape.back() : 1;
    const int outer_rank = last_kept ? r - 1 : r;
    std::vector<int64_t> idx(static_cast<size_t>(outer_rank), 0);
    const int64_t n = x.numel() / run;
    int64_t off = 0;
    for (int64_t i = 0; i < n; ++i) {
      if (run == 1) {
        dst[i] = src[off];
      } else {
        std::memcpy(dst + i * run, src + off, sizeof(T) * static_cast<size_t>(run));
      }
      for (int d = outer_rank - 1; d >= 0; --d) {
        const auto du = static_cast<size_t>(d);
        if (++idx[du] < out_shape[du]) {
          off += st[du];
          break;
        }
        off -= st[du] * (out_shape[du] - 1);
        idx[du] = 0;
      }
    }
  });
  return out;
}

}  // namespace

Var permute(const Var& a, const std::vector<int>& perm) {
  const int r = a.rank();
  if (static_cast<int>(perm.size()) != r) {
    throw ShapeError("permute: " + std::to_string(perm.size()) + " axes for rank " + std::to_string(r));
  }
  std::vector<int> inv(static_cast<size_t>(r), -1);
  for (int i = 0; i < r; ++i) {
    const int p = perm[static_cast<size_t>(i)];
    if (p < 0 || p >= r || inv[static_cast<size_t>(p)] != -1) throw ShapeError("permute: invalid permutation");
    inv[static_cast<size_t>(p)] = i;
  }
  Tensor out = permute_tensor(a.value(), perm);
  return make_result(std::move(out), {a}, [a, inv](const Tensor& g) {
    accumulate_grad(a, permute_tensor(g, inv));
  });
}

Var concat(const std::vector<Var>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat of empty list");
  const int r = parts[0].rank();
  const int ax = detail::normalize_axis(axis, r, "concat");
  Shape out_shape = parts[0].shape();
  out_shape[static_cast<size_t>(ax)] = 0;
  for (const Var& p : parts) {
    detail::require_same_dtype(parts[0], p, "concat");
    if (p.rank() != r) throw ShapeError("concat: rank mismatch");
    for (int i = 0; i < r; ++i) {
      if (i != ax && p.shape()[static_cast<size_t>(i)] != parts[0].shape()[static_cast<size_t>(i)]) {
        throw ShapeError("concat: shapes " + shape_str(parts[0].shape()) + " and " +
                         shape_str(p.shape()) + " differ off axis " + std::to_string(ax));
      }
    }
    out_shape[static_cast<size_t>(ax)] += p.dim(ax);
  }
  const auto osp = detail::split_at(out_shape, ax);
  Tensor out(out_shape, parts[0].dtype());
  std::vector<int64_t> widths;
  visit_dtype(out.dtype(), [&](auto tag) {
    using T = decltype(tag);
    T* dst = out.mutable_data<T>();
    int64_t col = 0;
    for (const Var& p : parts) {
      const int64_t w = p.dim(ax) * osp.inner;
      widths.push_back(w);
      const T* src = p.value().data<T>();
      for (int64_t o = 0; o < osp.outer; ++o) {
        std::memcpy(dst + o * osp.n * osp.inner + col, src + o * w, sizeof(T) * static_cast<size_t>(w));
      }
      col += w;
    }
  });
  return make_result(std::move(out), parts, [parts, widths, osp](const Tensor& g) {
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* src = g.data<T>();
      int64_t col = 0;
      for (size_t i = 0; i < parts.size(); ++i) {
        const int64_t w = widths[i];
        if (parts[i].requires_grad()) {
          Tensor gp(parts[i].shape(), g.dtype());
          T* dst = gp.mutable_data<T>();
          for (int64_t o = 0; o < osp.outer; ++o) {
            std::memcpy(dst + o * w, src + o * osp.n * osp.inner + col, sizeof(T) * static_cast<size_t>(w));
          }
          accumulate_grad(parts[i], gp);
        }
        col += w;
      }
    });
  });
}

Var slice(const Var& a, int axis, int64_t start, int64_t length) {
  const int ax = detail::normalize_axis(axis, a.rank(), "slice");
  if (start < 0 || length <= 0 || start + length > a.dim(ax)) {
    throw ShapeError("slice [" + std::to_string(start) + ", +" + std::to_string(length) +
                     ") out of range for axis extent " + std::to_string(a.dim(ax)));
  }
  const auto sp = detail::split_at(a.shape(), ax);
  Shape out_shape = a.shape();
  out_shape[static_cast<size_t>(ax)] = length;
  Tensor out(out_shape, a.dtype());
  const int64_t w = length * sp.inner;
  const int64_t off = start * sp.inner;
  visit_dtype(a.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* src = a.value().data<T>();
    T* dst = out.mutable_data<T>();
    for (int64_t o = 0; o < sp.outer; ++o) {
      std::memcpy(dst + o * w, src + o * sp.n * sp.inner + off, sizeof(T) * static_cast<size_t>(w));
    }
  });
  return make_result(std::move(out), {a}, [a, sp, w, off](const Tensor& g) {
    Tensor ga(a.shape(), g.dtype());
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* src = g.data<T>();
      T* dst = ga.mutable_data<T>();
      for (int64_t o = 0; o < sp.outer; ++o) {
        std::memcpy(dst + o * sp.n * sp.inner + off, src + o * w, sizeof(T) * static_cast<size_t>(w));
      }
    });
    accumulate_grad(a, ga);
  });
}

Var gather_weighted(const Var& src, std::shared_ptr<const SamplePlan> plan) {
  if (!plan) throw std::invalid_argument("gather_weighted: null plan");
  const int64_t c = src.dim(-1);
  const int64_t m = src.numel() / c;
  const int taps = plan->taps;
  if (static_cast<int64_t>(plan->index.size()) != plan->rows * taps ||
      plan->weight.size() != plan->index.size()) {
    throw std::invalid_argument("gather_weighted: malformed plan");
  }
  for (int64_t idx : plan->index) {
    if (idx >= m) throw std::out_of_range("gather_weighted: plan index beyond source rows");
  }
  Tensor out({plan->rows, c}, src.dtype());
  visit_dtype(src.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* s = src.value().data<T>();
    T* o = out.mutable_data<T>();
    for (int64_t r = 0; r < plan->rows; ++r) {
      for (int t = 0; t < taps; ++t) {
        const size_t q = static_cast<size_t>(r * taps + t);
        const int64_t idx = plan->index[q];
        const double w = plan->weight[q];
        if (idx < 0 || w == 0.0) continue;
        kernels::axpy(c, static_cast<T>(w), s + idx * c, o + r * c);
      }
    }
  });
  return make_result(std::move(out), {src}, [src, plan, c](const Tensor& g) {
    Tensor gs(src.shape(), g.dtype());
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* gp = g.data<T>();
      T* o = gs.mutable_data<T>();
      const int taps = plan->taps;
      for (int64_t r = 0; r < plan->rows; ++r) {
        for (int t = 0; t < taps; ++t) {
          const size_t q = static_cast<size_t>(r * taps + t);
          const int64_t idx = plan->index[q];
          const double w = plan->weight[q];
          if (idx < 0 || w == 0.0) continue;
          kernels::axpy(c, static_cast<T>(w), gp + r * c, o + idx * c);
        }
      }
    });
    accumulate_grad(src, gs);
  });
}

}  // namespace vpf
