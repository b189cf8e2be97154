// Compiled with -mavx2 -mfma. Nothing in this translation unit may run
// before dispatch.cpp has confirmed CPU support.
#include <immintrin.h>

#include <algorithm>
#include <cstring>
#include <vector>

#include "kernel_table.hpp"

namespace vpf::kernels::detail {
namespace {

constexpr int64_t kMR = 6;
constexpr int64_t kKC = 256;
constexpr int64_t kMC = 96;
constexpr int64_t kNC = 1024;

// Register-level vector traits; NR is two vectors wide.
struct F32 {
  using T = float;
  using V = __m256;
  static constexpr int64_t kLanes = 8;
  static V zero() { return _mm256_setzero_ps(); }
  static V load(const T* p) { return _mm256_loadu_ps(p); }
  static void store(T* p, V v) { _mm256_storeu_ps(p, v); }
  static V set1(T x) { return _mm256_set1_ps(x); }
  static V fma(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static V mul(V a, V b) { return _mm256_mul_ps(a, b); }
  static V add(V a, V b) { return _mm256_add_ps(a, b); }
  static V max(V a, V b) { return _mm256_max_ps(a, b); }
  static V and_gt_zero(V x, V g) {
    return _mm256_and_ps(_mm256_cmp_ps(x, _mm256_setzero_ps(), _CMP_GT_OQ), g);
  }
  static T hsum(V v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    __m128 s = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, s);
    s = _mm_add_ss(s, sh);
    return _mm_cvtss_f32(s);
  }
};

struct F64 {
  using T = double;
  using V = __m256d;
  static constexpr int64_t kLanes = 4;
  static V zero() { return _mm256_setzero_pd(); }
  static V load(const T* p) { return _mm256_loadu_pd(p); }
  static void store(T* p, V v) { _mm256_storeu_pd(p, v); }
  static V set1(T x) { return _mm256_set1_pd(x); }
  static V fma(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
  static V mul(V a, V b) { return _mm256_mul_pd(a, b); }
  static V add(V a, V b) { return _mm256_add_pd(a, b); }
  static V max(V a, V b) { return _mm256_max_pd(a, b); }
  static V and_gt_zero(V x, V g) {
    return _mm256_and_pd(_mm256_cmp_pd(x, _mm256_setzero_pd(), _CMP_GT_OQ), g);
  }
  static T hsum(V v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d h = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, h));
  }
};

template <class S>
struct Gemm {
  using T = typename S::T;
  using V = typename S::V;
  static constexpr int64_t kNR = 2 * S::kLanes;

  static void pack_a(bool ta, const T* a, int64_t lda, int64_t i0, int64_t mc, int64_t p0,
                     int64_t kc, T* buf) {
    for (int64_t ir = 0; ir < mc; ir += kMR) {
      const int64_t rows = std::min(kMR, mc - ir);
      for (int64_t p = 0; p < kc; ++p) {
        for (int64_t r = 0; r < kMR; ++r) {
          if (r < rows) {
            const int64_t i = i0 + ir + r;
            const int64_t q = p0 + p;
            *buf++ = ta ? a[q * lda + i] : a[i * lda + q];
          } else {
            *buf++ = T(0);
          }
        }
      }
    }
  }

  static void pack_b(bool tb, const T* b, int64_t ldb, int64_t p0, int64_t kc, int64_t j0,
                     int64_t nc, T* buf) {
    for (int64_t jr = 0; jr < nc; jr += kNR) {
      const int64_t cols = std::min(kNR, nc - jr);
      for (int64_t p = 0; p < kc; ++p) {
        const int64_t q = p0 + p;
        if (!tb && cols == kNR) {
          std::memcpy(buf, b + q * ldb + j0 + jr, sizeof(T) * kNR);
          buf += kNR;
          continue;
        }
        for (int64_t c = 0; c < kNR; ++c) {
          if (c < cols) {
            const int64_t j = j0 + jr + c;
            *buf++ = tb ? b[j * ldb + q] : b[q * ldb + j];
          } else {
            *buf++ = T(0);
          }
        }
      }
    }
  }

  static void micro(int64_t kc, const T* a, const T* b, T* c, int64_t ldc, T alpha, T beta,
                    int64_t mr, int64_t nr) {
    V c00 = S::zero(), c01 = S::zero(), c10 = S::zero(), c11 = S::zero();
    V c20 = S::zero(), c21 = S::zero(), c30 = S::zero(), c31 = S::zero();
    V c40 = S::zero(), c41 = S::zero(), c50 = S::zero(), c51 = S::zero();
    for (int64_t p = 0; p < kc; ++p) {
      const V b0 = S::load(b);
      const V b1 = S::load(b + S::kLanes);
      V ar = S::set1(a[0]);
      c00 = S::fma(ar, b0, c00);
      c01 = S::fma(ar, b1, c01);
      ar = S::set1(a[1]);
      c10 = S::fma(ar, b0, c10);
      c11 = S::fma(ar, b1, c11);
      ar = S::set1(a[2]);
      c20 = S::fma(ar, b0, c20);
      c21 = S::fma(ar, b1, c21);
      ar = S::set1(a[3]);
      c30 = S::fma(ar, b0, c30);
      c31 = S::fma(ar, b1, c31);
      ar = S::set1(a[4]);
      c40 = S::fma(ar, b0, c40);
      c41 = S::fma(ar, b1, c41);
      ar = S::set1(a[5]);
      c50 = S::fma(ar, b0, c50);
      c51 = S::fma(ar, b1, c51);
      a += kMR;
      b += kNR;
    }
    alignas(32) T tile[kMR * kNR];
    const V va = S::set1(alpha);
    S::store(tile + 0 * kNR, S::mul(va, c00));
    S::store(tile + 0 * kNR + S::kLanes, S::mul(va, c01));
    S::store(tile + 1 * kNR, S::mul(va, c10));
    S::store(tile + 1 * kNR + S::kLanes, S::mul(va, c11));
    S::store(tile + 2 * kNR, S::mul(va, c20));
    S::store(tile + 2 * kNR + S::kLanes, S::mul(va, c21));
    S::store(tile + 3 * kNR, S::mul(va, c30));
    S::store(tile + 3 * kNR + S::kLanes, S::mul(va, c31));
    S::store(tile + 4 * kNR, S::mul(va, c40));
    S::store(tile + 4 * kNR + S::kLanes, S::mul(va, c41));
    S::store(tile + 5 * kNR, S::mul(va, c50));
    S::store(tile + 5 * kNR + S::kLanes, S::mul(va, c51));
    if (nr == kNR) {
      const V vb = S::set1(beta);
      for (int64_t r = 0; r < mr; ++r) {
        T* crow = c + r * ldc;
        V lo = S::load(tile + r * kNR);
        V hi = S::load(tile + r * kNR + S::kLanes);
        if (beta != T(0)) {
          lo = S::fma(vb, S::load(crow), lo);
          hi = S::fma(vb, S::load(crow + S::kLanes), hi);
        }
        S::store(crow, lo);
        S::store(crow + S::kLanes, hi);
      }
      return;
    }
    for (int64_t r = 0; r < mr; ++r) {
      T* crow = c + r * ldc;
      for (int64_t j = 0; j < nr; ++j) {
        crow[j] = beta == T(0) ? tile[r * kNR + j] : tile[r * kNR + j] + beta * crow[j];
      }
    }
  }

  static void run(bool ta, bool tb, int64_t m, int64_t n, int64_t k, T alpha, const T* a,
                  int64_t lda, const T* b, int64_t ldb, T beta, T* c, int64_t ldc) {
    if (m <= 0 || n <= 0) return;
    if (k <= 0 || alpha == T(0)) {
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
          c[i * ldc + j] = beta == T(0) ? T(0) : beta * c[i * ldc + j];
        }
      }
      return;
    }
    thread_local std::vector<T> abuf;
    thread_local std::vector<T> bbuf;
    abuf.resize(static_cast<size_t>(kMC * kKC));
    bbuf.resize(static_cast<size_t>(kKC * (kNC + kNR)));
    for (int64_t jc = 0; jc < n; jc += kNC) {
      const int64_t nc = std::min(kNC, n - jc);
      for (int64_t pc = 0; pc < k; pc += kKC) {
        const int64_t kc = std::min(kKC, k - pc);
        const T beta_eff = pc == 0 ? beta : T(1);
        pack_b(tb, b, ldb, pc, kc, jc, nc, bbuf.data());
        for (int64_t ic = 0; ic < m; ic += kMC) {
          const int64_t mc = std::min(kMC, m - ic);
          pack_a(ta, a, lda, ic, mc, pc, kc, abuf.data());
          for (int64_t jr = 0; jr < nc; jr += kNR) {
            const T* bp = bbuf.data() + jr * kc;
            for (int64_t ir = 0; ir < mc; ir += kMR) {
              const T* ap = abuf.data() + ir * kc;
              micro(kc, ap, bp, c + (ic + ir) * ldc + jc + jr, ldc, alpha, beta_eff,
                    std::min(kMR, mc - ir), std::min(kNR, nc - jr));
            }
          }
        }
      }
    }
  }
};

template <class S>
struct Vec {
  using T = typename S::T;
  using V = typename S::V;
  static constexpr int64_t L = S::kLanes;

  static void add(int64_t n, const T* a, const T* b, T* out) {
    int64_t i = 0;
    for (; i + L <= n; i += L) S::store(out + i, S::add(S::load(a + i), S::load(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
  }
  static void mul(int64_t n, const T* a, const T* b, T* out) {
    int64_t i = 0;
    for (; i + L <= n; i += L) S::store(out + i, S::mul(S::load(a + i), S::load(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
  }
  static void axpy(int64_t n, T alpha, const T* x, T* y) {
    const V va = S::set1(alpha);
    int64_t i = 0;
    for (; i + L <= n; i += L) S::store(y + i, S::fma(va, S::load(x + i), S::load(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
  }
  static void scale(int64_t n, T alpha, const T* x, T* out) {
    const V va = S::set1(alpha);
    int64_t i = 0;
    for (; i + L <= n; i += L) S::store(out + i, S::mul(va, S::load(x + i)));
    for (; i < n; ++i) out[i] = alpha * x[i];
  }
  static void relu(int64_t n, const T* x, T* out) {
    const V z = S::zero();
    int64_t i = 0;
    for (; i + L <= n; i += L) S::store(out + i, S::max(S::load(x + i), z));
    for (; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
  }
  static void relu_backward(int64_t n, const T* x, const T* g, T* out) {
    int64_t i = 0;
    for (; i + L <= n; i += L) S::store(out + i, S::and_gt_zero(S::load(x + i), S::load(g + i)));
    for (; i < n; ++i) out[i] = x[i] > T(0) ? g[i] : T(0);
  }
  static T dot(int64_t n, const T* a, const T* b) {
    V s0 = S::zero(), s1 = S::zero();
    int64_t i = 0;
    for (; i + 2 * L <= n; i += 2 * L) {
      s0 = S::fma(S::load(a + i), S::load(b + i), s0);
      s1 = S::fma(S::load(a + i + L), S::load(b + i + L), s1);
    }
    for (; i + L <= n; i += L) s0 = S::fma(S::load(a + i), S::load(b + i), s0);
    T s = S::hsum(S::add(s0, s1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
  }
  static T sum(int64_t n, const T* x) {
    V s0 = S::zero(), s1 = S::zero();
    int64_t i = 0;
    for (; i + 2 * L <= n; i += 2 * L) {
      s0 = S::add(S::load(x + i), s0);
      s1 = S::add(S::load(x + i + L), s1);
    }
    for (; i + L <= n; i += L) s0 = S::add(S::load(x + i), s0);
    T s = S::hsum(S::add(s0, s1));
    for (; i < n; ++i) s += x[i];
    return s;
  }
};

template <class S>
constexpr Ops<typename S::T> make_ops() {
  return {&Gemm<S>::run,  &Vec<S>::add,           &Vec<S>::mul, &Vec<S>::axpy, &Vec<S>::scale,
          &Vec<S>::relu,  &Vec<S>::relu_backward, &Vec<S>::dot, &Vec<S>::sum};
}

}  // namespace

const Table& avx2_table() {
  static const Table table{make_ops<F32>(), make_ops<F64>()};
  return table;
}

}  // namespace vpf::kernels::detail
