#include <cmath>

#include "op_util.hpp"

namespace vpf {
namespace {

void check_affine(const Var& p, int64_t c, const char* what) {
  if (p.defined() && (p.rank() != 1 || p.dim(0) != c)) {
    throw ShapeError(std::string(what) + " must have shape [" + std::to_string(c) + "], got " +
                     shape_str(p.shape()));
  }
}

// Normalized values and inverse deviations for both norms. Elements of one
// statistics group are (row in [0, rows), channel in [c0, c0 + cg)) where a
// row is `stride` apart; layer_norm is the case groups == 1 with rows == 1.
struct NormState {
  Tensor xhat;
  std::vector<double> rstd;
  int64_t items = 0;  // independent statistic blocks along the outer axis
  int64_t rows = 0;   // positions per item
  int64_t c = 0;
  int64_t groups = 1;
};

template <class T>
void norm_forward(const T* x, NormState& st, double eps) {
  const int64_t cg = st.c / st.groups;
  T* xh = st.xhat.template mutable_data<T>();
  st.rstd.assign(static_cast<size_t>(st.items * st.groups), 0.0);
  for (int64_t it = 0; it < st.items; ++it) {
    const int64_t base = it * st.rows * st.c;
    for (int64_t gi = 0; gi < st.groups; ++gi) {
      double s = 0.0, s2 = 0.0;
      for (int64_t r = 0; r < st.rows; ++r) {
        const T* p = x + base + r * st.c + gi * cg;
        for (int64_t j = 0; j < cg; ++j) s += static_cast<double>(p[j]);
      }
      const double n = static_cast<double>(st.rows * cg);
      const double m = s / n;
      for (int64_t r = 0; r < st.rows; ++r) {
        const T* p = x + base + r * st.c + gi * cg;
        for (int64_t j = 0; j < cg; ++j) {
          const double d = static_cast<double>(p[j]) - m;
          s2 += d * d;
        }
      }
      const double rs = 1.0 / std::sqrt(s2 / n + eps);
      st.rstd[static_cast<size_t>(it * st.groups + gi)] = rs;
      for (int64_t r = 0; r < st.rows; ++r) {
        const int64_t off = base + r * st.c + gi * cg;
        for (int64_t j = 0; j < cg; ++j) {
          xh[off + j] = static_cast<T>((static_cast<double>(x[off + j]) - m) * rs);
        }
      }
    }
  }
}

Var norm_op(const Var& x, NormState st, const Var& gamma, const Var& beta, double eps) {
  st.xhat = Tensor(x.shape(), x.dtype());
  Tensor out(x.shape(), x.dtype());
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    norm_forward(x.value().data<T>(), st, eps);
    const T* xh = st.xhat.data<T>();
    T* y = out.mutable_data<T>();
    const T* gp = gamma.defined() ? gamma.value().data<T>() : nullptr;
    const T* bp = beta.defined() ? beta.value().data<T>() : nullptr;
    const int64_t total_rows = st.items * st.rows;
    for (int64_t r = 0; r < total_rows; ++r) {
      for (int64_t j = 0; j < st.c; ++j) {
        T v = xh[r * st.c + j];
        if (gp) v *= gp[j];
        if (bp) v += bp[j];
        y[r * st.c + j] = v;
      }
    }
  });
  std::vector<Var> inputs{x};
  if (gamma.defined()) inputs.push_back(gamma);
  if (beta.defined()) inputs.push_back(beta);
  auto state = std::make_shared<NormState>(std::move(st));
  return make_result(std::move(out), std::move(inputs), [x, gamma, beta, state](const Tensor& g) {
    const NormState& s = *state;
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* gp = g.data<T>();
      const T* xh = s.xhat.data<T>();
      const int64_t total_rows = s.items * s.rows;
      if (gamma.defined() && gamma.requires_grad()) {
        Tensor gg(gamma.shape(), g.dtype());
        T* o = gg.mutable_data<T>();
        for (int64_t r = 0; r < total_rows; ++r) {
          for (int64_t j = 0; j < s.c; ++j) o[j] += gp[r * s.c + j] * xh[r * s.c + j];
        }
        accumulate_grad(gamma, gg);
      }
      if (beta.defined() && beta.requires_grad()) {
        Tensor gb(beta.shape(), g.dtype());
        detail::add_column_sums(gp, total_rows, s.c, gb.mutable_data<T>());
        accumulate_grad(beta, gb);
      }
      if (!x.requires_grad()) return;
      const T* gam = gamma.defined() ? gamma.value().data<T>() : nullptr;
      Tensor gx(x.shape(), g.dtype());
      T* gxp = gx.mutable_data<T>();
      const int64_t cg = s.c / s.groups;
      const double n = static_cast<double>(s.rows * cg);
      for (int64_t it = 0; it < s.items; ++it) {
        const int64_t base = it * s.rows * s.c;
        for (int64_t gi = 0; gi < s.groups; ++gi) {
          double a = 0.0, b = 0.0;
          for (int64_t r = 0; r < s.rows; ++r) {
            const int64_t off = base + r * s.c + gi * cg;
            for (int64_t j = 0; j < cg; ++j) {
              const double dxh = static_cast<double>(gp[off + j]) * (gam ? gam[gi * cg + j] : T(1));
              a += dxh;
              b += dxh * static_cast<double>(xh[off + j]);
            }
          }
          a /= n;
          b /= n;
          const double rs = s.rstd[static_cast<size_t>(it * s.groups + gi)];
          for (int64_t r = 0; r < s.rows; ++r) {
            const int64_t off = base + r * s.c + gi * cg;
            for (int64_t j = 0; j < cg; ++j) {
              const double dxh = static_cast<double>(gp[off + j]) * (gam ? gam[gi * cg + j] : T(1));
              gxp[off + j] = static_cast<T>(rs * (dxh - a - static_cast<double>(xh[off + j]) * b));
            }
          }
        }
      }
      accumulate_grad(x, gx);
    });
  });
}

}  // namespace

Var group_norm(const Var& x, int groups, const Var& gamma, const Var& beta, double eps) {
  if (x.rank() < 2) throw ShapeError("group_norm expects [B, ..., C], got " + shape_str(x.shape()));
  const int64_t c = x.dim(-1);
  if (groups < 1 || c % groups != 0) {
    throw std::invalid_argument("group_norm: " + std::to_string(c) + " channels not divisible into " +
                                std::to_string(groups) + " groups");
  }
  check_affine(gamma, c, "group_norm gamma");
  check_affine(beta, c, "group_norm beta");
  NormState st;
  st.items = x.dim(0);
  st.c = c;
  st.rows = x.numel() / (st.items * c);
  st.groups = groups;
  return norm_op(x, std::move(st), gamma, beta, eps);
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const int64_t c = x.dim(-1);
  check_affine(gamma, c, "layer_norm gamma");
  check_affine(beta, c, "layer_norm beta");
  NormState st;
  st.items = x.numel() / c;
  st.rows = 1;
  st.c = c;
  st.groups = 1;
  return norm_op(x, std::move(st), gamma, beta, eps);
}

}  // namespace vpf
