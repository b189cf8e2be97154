#include <algorithm>
#include <cmath>

#include "op_util.hpp"
#include "vpf/kernels.hpp"

namespace vpf {
namespace {

thread_local AttentionObserver g_observer;

}  // namespace

ScopedAttentionObserver::ScopedAttentionObserver(AttentionObserver fn) : saved_(std::move(g_observer)) {
  g_observer = std::move(fn);
}

ScopedAttentionObserver::~ScopedAttentionObserver() { g_observer = std::move(saved_); }

Var attention(const Var& q, const Var& k, const Var& v, int heads) {
  detail::require_same_dtype(q, k, "attention");
  detail::require_same_dtype(q, v, "attention");
  if (q.rank() != 3 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw ShapeError("attention expects equal [G, L, C] q/k/v, got " + shape_str(q.shape()) + ", " +
                     shape_str(k.shape()) + ", " + shape_str(v.shape()));
  }
  const int64_t groups = q.dim(0), len = q.dim(1), c = q.dim(2);
  if (heads < 1 || c % heads != 0) {
    throw std::invalid_argument("attention: width " + std::to_string(c) + " not divisible by " +
                                std::to_string(heads) + " heads");
  }
  if (g_observer) g_observer(groups, len);
  const int64_t dh = c / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor probs({groups, heads, len, len}, q.dtype());
  Tensor out(q.shape(), q.dtype());
  visit_dtype(q.dtype(), [&](auto tag) {
    using T = decltype(tag);
    const T* qp = q.value().data<T>();
    const T* kp = k.value().data<T>();
    const T* vp = v.value().data<T>();
    T* pp = probs.mutable_data<T>();
    T* op = out.mutable_data<T>();
    for (int64_t gi = 0; gi < groups; ++gi) {
      for (int h = 0; h < heads; ++h) {
        const int64_t off = gi * len * c + h * dh;
        T* p = pp + (gi * heads + h) * len * len;
        kernels::gemm(false, true, len, len, dh, static_cast<T>(inv), qp + off, c, kp + off, c, T(0), p, len);
        for (int64_t i = 0; i < len; ++i) {
          T* row = p + i * len;
          const T mx = *std::max_element(row, row + len);
          T s = T(0);
          for (int64_t j = 0; j < len; ++j) {
            row[j] = std::exp(row[j] - mx);
            s += row[j];
          }
          const T is = T(1) / s;
          for (int64_t j = 0; j < len; ++j) row[j] *= is;
        }
        kernels::gemm(false, false, len, dh, len, T(1), p, len, vp + off, c, T(0), op + off, c);
      }
    }
  });
  return make_result(std::move(out), {q, k, v}, [=](const Tensor& g) {
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* gp = g.data<T>();
      const T* qp = q.value().data<T>();
      const T* kp = k.value().data<T>();
      const T* vp = v.value().data<T>();
      const T* pp = probs.data<T>();
      Tensor gq(q.shape(), g.dtype()), gk(k.shape(), g.dtype()), gv(v.shape(), g.dtype());
      std::vector<T> dp(static_cast<size_t>(len * len));
      for (int64_t gi = 0; gi < groups; ++gi) {
        for (int h = 0; h < heads; ++h) {
          const int64_t off = gi * len * c + h * dh;
          const T* p = pp + (gi * heads + h) * len * len;
          kernels::gemm(true, false, len, dh, len, T(1), p, len, gp + off, c, T(0), gv.mutable_data<T>() + off, c);
          kernels::gemm(false, true, len, len, dh, T(1), gp + off, c, vp + off, c, T(0), dp.data(), len);
          for (int64_t i = 0; i < len; ++i) {
            const T* pr = p + i * len;
            T* dr = dp.data() + i * len;
            T s = T(0);
            for (int64_t j = 0; j < len; ++j) s += pr[j] * dr[j];
            for (int64_t j = 0; j < len; ++j) dr[j] = pr[j] * (dr[j] - s);
          }
          kernels::gemm(false, false, len, dh, len, static_cast<T>(inv), dp.data(), len, kp + off, c, T(0), gq.mutable_data<T>() + off, c);
          kernels::gemm(true, false, len, dh, len, static_cast<T>(inv), dp.data(), len, qp + off, c, T(0), gk.mutable_data<T>() + off, c);
        }
      }
      accumulate_grad(q, gq);
      accumulate_grad(k, gk);
      accumulate_grad(v, gv);
    });
  });
}

}  // namespace vpf
