#include <cstring>

#include "op_util.hpp"
#include "vpf/kernels.hpp"

namespace vpf {
namespace {

struct ConvGeom {
  int64_t b, d, h, w, ci;
  int64_t kd, kh, kw, co;
  int64_t sd, sh, sw, pd, ph, pw;
  int64_t od, oh, ow;
  int64_t rows() const { return b * od * oh * ow; }
  int64_t kcols() const { return kd * kh * kw * ci; }
  bool pointwise() const {
    return kd == 1 && kh == 1 && kw == 1 && sd == 1 && sh == 1 && sw == 1 && pd == 0 && ph == 0 && pw == 0;
  }
};

template <class T>
void im2col(const ConvGeom& g, const T* x, T* col) {
  const int64_t kc = g.kcols();
  const size_t run = sizeof(T) * static_cast<size_t>(g.ci);
  int64_t row = 0;
  for (int64_t b = 0; b < g.b; ++b) {
    for (int64_t od = 0; od < g.od; ++od) {
      for (int64_t oh = 0; oh < g.oh; ++oh) {
        for (int64_t ow = 0; ow < g.ow; ++ow, ++row) {
          T* dst = col + row * kc;
          for (int64_t a = 0; a < g.kd; ++a) {
            const int64_t id = od * g.sd - g.pd + a;
            for (int64_t c = 0; c < g.kh; ++c) {
              const int64_t ih = oh * g.sh - g.ph + c;
              for (int64_t e = 0; e < g.kw; ++e, dst += g.ci) {
                const int64_t iw = ow * g.sw - g.pw + e;
                if (id < 0 || id >= g.d || ih < 0 || ih >= g.h || iw < 0 || iw >= g.w) continue;
                std::memcpy(dst, x + (((b * g.d + id) * g.h + ih) * g.w + iw) * g.ci, run);
              }
            }
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const ConvGeom& g, const T* col, T* x) {
  const int64_t kc = g.kcols();
  int64_t row = 0;
  for (int64_t b = 0; b < g.b; ++b) {
    for (int64_t od = 0; od < g.od; ++od) {
      for (int64_t oh = 0; oh < g.oh; ++oh) {
        for (int64_t ow = 0; ow < g.ow; ++ow, ++row) {
          const T* src = col + row * kc;
          for (int64_t a = 0; a < g.kd; ++a) {
            const int64_t id = od * g.sd - g.pd + a;
            for (int64_t c = 0; c < g.kh; ++c) {
              const int64_t ih = oh * g.sh - g.ph + c;
              for (int64_t e = 0; e < g.kw; ++e, src += g.ci) {
                const int64_t iw = ow * g.sw - g.pw + e;
                if (id < 0 || id >= g.d || ih < 0 || ih >= g.h || iw < 0 || iw >= g.w) continue;
                kernels::axpy(g.ci, T(1), src, x + (((b * g.d + id) * g.h + ih) * g.w + iw) * g.ci);
              }
            }
          }
        }
      }
    }
  }
}

int64_t out_extent(int64_t in, int64_t k, int64_t s, int64_t p, const char* axis) {
  if (s < 1) throw std::invalid_argument(std::string("conv: stride must be >= 1 on axis ") + axis);
  if (p < 0) throw std::invalid_argument(std::string("conv: negative padding on axis ") + axis);
  if (in + 2 * p < k) {
    throw ShapeError(std::string("conv: kernel extent ") + std::to_string(k) +
                     " exceeds padded input extent " + std::to_string(in + 2 * p) + " on axis " + axis);
  }
  return (in + 2 * p - k) / s + 1;
}

}  // namespace

Var conv3d(const Var& x, const Var& w, const Var& bias, std::array<int, 3> stride,
           std::array<int, 3> padding) {
  detail::require_same_dtype(x, w, "conv3d");
  if (x.rank() != 5 || w.rank() != 5) {
    throw ShapeError("conv3d expects x [B,D,H,W,C] and w [KD,KH,KW,Cin,Cout], got " +
                     shape_str(x.shape()) + " and " + shape_str(w.shape()));
  }
  if (x.dim(4) != w.dim(3)) {
    throw ShapeError("conv3d: input has " + std::to_string(x.dim(4)) + " channels, kernel expects " +
                     std::to_string(w.dim(3)));
  }
  ConvGeom g{};
  g.b = x.dim(0), g.d = x.dim(1), g.h = x.dim(2), g.w = x.dim(3), g.ci = x.dim(4);
  g.kd = w.dim(0), g.kh = w.dim(1), g.kw = w.dim(2), g.co = w.dim(4);
  g.sd = stride[0], g.sh = stride[1], g.sw = stride[2];
  g.pd = padding[0], g.ph = padding[1], g.pw = padding[2];
  g.od = out_extent(g.d, g.kd, g.sd, g.pd, "D");
  g.oh = out_extent(g.h, g.kh, g.sh, g.ph, "H");
  g.ow = out_extent(g.w, g.kw, g.sw, g.pw, "W");
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.co)) {
    throw ShapeError("conv3d: bias " + shape_str(bias.shape()) + " for " + std::to_string(g.co) + " outputs");
  }

  Tensor col = g.pointwise() ? x.value() : Tensor({g.rows(), g.kcols()}, x.dtype());
  Tensor out({g.b, g.od, g.oh, g.ow, g.co}, x.dtype());
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    if (!g.pointwise()) im2col(g, x.value().data<T>(), col.mutable_data<T>());
    T* y = out.mutable_data<T>();
    T beta = T(0);
    if (bias.defined()) {
      const T* bp = bias.value().data<T>();
      for (int64_t r = 0; r < g.rows(); ++r) std::memcpy(y + r * g.co, bp, sizeof(T) * static_cast<size_t>(g.co));
      beta = T(1);
    }
    kernels::gemm(false, false, g.rows(), g.co, g.kcols(), T(1), col.data<T>(), g.kcols(),
                  w.value().data<T>(), g.co, beta, y, g.co);
  });
  std::vector<Var> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [x, w, bias, g, col](const Tensor& gout) {
    visit_dtype(gout.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* gp = gout.data<T>();
      if (w.requires_grad()) {
        Tensor gw(w.shape(), gout.dtype());
        kernels::gemm(true, false, g.kcols(), g.co, g.rows(), T(1), col.data<T>(), g.kcols(), gp,
                      g.co, T(0), gw.mutable_data<T>(), g.co);
        accumulate_grad(w, gw);
      }
      if (bias.defined() && bias.requires_grad()) {
        Tensor gb(bias.shape(), gout.dtype());
        detail::add_column_sums(gp, g.rows(), g.co, gb.mutable_data<T>());
        accumulate_grad(bias, gb);
      }
      if (x.requires_grad()) {
        Tensor gx(x.shape(), gout.dtype());
        if (g.pointwise()) {
          kernels::gemm(false, true, g.rows(), g.kcols(), g.co, T(1), gp, g.co, w.value().data<T>(),
                        g.co, T(0), gx.mutable_data<T>(), g.kcols());
        } else {
          Tensor gcol({g.rows(), g.kcols()}, gout.dtype());
          kernels::gemm(false, true, g.rows(), g.kcols(), g.co, T(1), gp, g.co, w.value().data<T>(),
                        g.co, T(0), gcol.mutable_data<T>(), g.kcols());
          col2im(g, gcol.data<T>(), gx.mutable_data<T>());
        }
        accumulate_grad(x, gx);
      }
    });
  });
}

Var conv2d(const Var& x, const Var& w, const Var& bias, std::array<int, 2> stride,
           std::array<int, 2> padding) {
  if (x.rank() != 4 || w.rank() != 4) {
    throw ShapeError("conv2d expects x [B,H,W,C] and w [KH,KW,Cin,Cout], got " +
                     shape_str(x.shape()) + " and " + shape_str(w.shape()));
  }
  const Var x5 = reshape(x, {x.dim(0), 1, x.dim(1), x.dim(2), x.dim(3)});
  const Var w5 = reshape(w, {1, w.dim(0), w.dim(1), w.dim(2), w.dim(3)});
  const Var y = conv3d(x5, w5, bias, {1, stride[0], stride[1]}, {0, padding[0], padding[1]});
  return reshape(y, {y.dim(0), y.dim(2), y.dim(3), y.dim(4)});
}

Var conv_transpose3d_k2s2(const Var& x, const Var& w, const Var& bias) {
  detail::require_same_dtype(x, w, "conv_transpose3d");
  if (x.rank() != 5 || w.rank() != 5 || w.dim(1) != 2 || w.dim(2) != 2 || w.dim(3) != 2 ||
      w.dim(0) != x.dim(4)) {
    throw ShapeError("conv_transpose3d_k2s2: x " + shape_str(x.shape()) + " incompatible with w " +
                     shape_str(w.shape()));
  }
  const int64_t b = x.dim(0), d = x.dim(1), h = x.dim(2), wd = x.dim(3), ci = x.dim(4), co = w.dim(4);
  const int64_t rows = b * d * h * wd;
  Tensor out({b, 2 * d, 2 * h, 2 * wd, co}, x.dtype());
  // Maps (input row, tap) to the output row receiving it.
  auto out_row = [=](int64_t r, int tap) {
    const int64_t iw = r % wd;
    const int64_t ih = (r / wd) % h;
    const int64_t id = (r / (wd * h)) % d;
    const int64_t ib = r / (wd * h * d);
    const int64_t a = tap >> 2, c = (tap >> 1) & 1, e = tap & 1;
    return ((ib * 2 * d + 2 * id + a) * 2 * h + 2 * ih + c) * 2 * wd + 2 * iw + e;
  };
  visit_dtype(x.dtype(), [&](auto tag) {
    using T = decltype(tag);
    Tensor y0({rows, 8 * co}, x.dtype());
    kernels::gemm(false, false, rows, 8 * co, ci, T(1), x.value().data<T>(), ci, w.value().data<T>(),
                  8 * co, T(0), y0.mutable_data<T>(), 8 * co);
    const T* src = y0.data<T>();
    T* dst = out.mutable_data<T>();
    const T* bp = bias.defined() ? bias.value().data<T>() : nullptr;
    for (int64_t r = 0; r < rows; ++r) {
      for (int t = 0; t < 8; ++t) {
        T* o = dst + out_row(r, t) * co;
        const T* s = src + (r * 8 + t) * co;
        if (bp) {
          kernels::add(co, s, bp, o);
        } else {
          std::memcpy(o, s, sizeof(T) * static_cast<size_t>(co));
        }
      }
    }
  });
  std::vector<Var> inputs{x, w};
  if (bias.defined()) inputs.push_back(bias);
  return make_result(std::move(out), std::move(inputs), [=](const Tensor& g) {
    visit_dtype(g.dtype(), [&](auto tag) {
      using T = decltype(tag);
      const T* gp = g.data<T>();
      Tensor g0({rows, 8 * co}, g.dtype());
      T* g0p = g0.mutable_data<T>();
      for (int64_t r = 0; r < rows; ++r) {
        for (int t = 0; t < 8; ++t) {
          std::memcpy(g0p + (r * 8 + t) * co, gp + out_row(r, t) * co, sizeof(T) * static_cast<size_t>(co));
        }
      }
      if (x.requires_grad()) {
        Tensor gx(x.shape(), g.dtype());
        kernels::gemm(false, true, rows, ci, 8 * co, T(1), g0p, 8 * co, w.value().data<T>(), 8 * co,
                      T(0), gx.mutable_data<T>(), ci);
        accumulate_grad(x, gx);
      }
      if (w.requires_grad()) {
        Tensor gw(w.shape(), g.dtype());
        kernels::gemm(true, false, ci, 8 * co, rows, T(1), x.value().data<T>(), ci, g0p, 8 * co,
                      T(0), gw.mutable_data<T>(), 8 * co);
        accumulate_grad(w, gw);
      }
      if (bias.defined() && bias.requires_grad()) {
        Tensor gb(bias.shape(), g.dtype());
        detail::add_column_sums(gp, g.numel() / co, co, gb.mutable_data<T>());
        accumulate_grad(bias, gb);
      }
    });
  });
}

}  // namespace vpf
