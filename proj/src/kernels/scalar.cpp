#include <algorithm>

#include "kernel_table.hpp"

// Straightforward reference kernels. They define the expected numerics for
// the SIMD variants and serve as the fallback on CPUs without AVX2.
namespace vpf::kernels::detail {
namespace {

template <class T>
void gemm_ref(bool ta, bool tb, int64_t m, int64_t n, int64_t k, T alpha, const T* a,
              int64_t lda, const T* b, int64_t ldb, T beta, T* c, int64_t ldc) {
  for (int64_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (beta == T(0)) {
      std::fill(crow, crow + n, T(0));
    } else if (beta != T(1)) {
      for (int64_t j = 0; j < n; ++j) crow[j] *= beta;
    }
    for (int64_t p = 0; p < k; ++p) {
      const T aip = alpha * (ta ? a[p * lda + i] : a[i * lda + p]);
      if (aip == T(0)) continue;
      if (tb) {
        for (int64_t j = 0; j < n; ++j) crow[j] += aip * b[j * ldb + p];
      } else {
        const T* brow = b + p * ldb;
        for (int64_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
      }
    }
  }
}

template <class T>
void add_ref(int64_t n, const T* a, const T* b, T* out) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}
template <class T>
void mul_ref(int64_t n, const T* a, const T* b, T* out) {
  for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}
template <class T>
void axpy_ref(int64_t n, T alpha, const T* x, T* y) {
  for (int64_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}
template <class T>
void scale_ref(int64_t n, T alpha, const T* x, T* out) {
  for (int64_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}
template <class T>
void relu_ref(int64_t n, const T* x, T* out) {
  for (int64_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}
template <class T>
void relu_backward_ref(int64_t n, const T* x, const T* g, T* out) {
  for (int64_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? g[i] : T(0);
}
template <class T>
T dot_ref(int64_t n, const T* a, const T* b) {
  T s = 0;
  for (int64_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}
template <class T>
T sum_ref(int64_t n, const T* x) {
  T s = 0;
  for (int64_t i = 0; i < n; ++i) s += x[i];
  return s;
}

template <class T>
constexpr Ops<T> make_ops() {
  return {&gemm_ref<T>,  &add_ref<T>,           &mul_ref<T>,  &axpy_ref<T>, &scale_ref<T>,
          &relu_ref<T>,  &relu_backward_ref<T>, &dot_ref<T>,  &sum_ref<T>};
}

}  // namespace

const Table& scalar_table() {
  static const Table table{make_ops<float>(), make_ops<double>()};
  return table;
}

}  // namespace vpf::kernels::detail
