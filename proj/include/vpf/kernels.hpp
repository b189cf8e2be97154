#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

// Dense arithmetic kernels behind the tensor engine. Every kernel has a
// portable scalar reference and an AVX2/FMA variant; the active variant is
// chosen once at startup from CPUID and can be forced for equivalence tests.
namespace vpf::kernels {

enum class Isa : uint8_t { scalar = 0, avx2 = 1 };

/// Variant currently used by the free functions below.
Isa active_isa();
/// True when the host CPU can run the given variant.
bool isa_supported(Isa isa);
/// Force a variant (throws std::invalid_argument if unsupported).
void set_isa(Isa isa);
std::string_view isa_name(Isa isa);

// Row-major GEMM: C = alpha * op(A) * op(B) + beta * C, op(X) = X or X^T.
// op(A) is m x k, op(B) is k x n. With beta == 0, C is not read.
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, float alpha,
          const float* a, int64_t lda, const float* b, int64_t ldb, float beta, float* c,
          int64_t ldc);
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, double alpha,
          const double* a, int64_t lda, const double* b, int64_t ldb, double beta, double* c,
          int64_t ldc);

// out[i] = a[i] + b[i]
void add(int64_t n, const float* a, const float* b, float* out);
void add(int64_t n, const double* a, const double* b, double* out);
// out[i] = a[i] * b[i]
void mul(int64_t n, const float* a, const float* b, float* out);
void mul(int64_t n, const double* a, const double* b, double* out);
// y[i] += alpha * x[i]
void axpy(int64_t n, float alpha, const float* x, float* y);
void axpy(int64_t n, double alpha, const double* x, double* y);
// out[i] = alpha * x[i]
void scale(int64_t n, float alpha, const float* x, float* out);
void scale(int64_t n, double alpha, const double* x, double* out);
// out[i] = max(x[i], 0)
void relu(int64_t n, const float* x, float* out);
void relu(int64_t n, const double* x, double* out);
// out[i] = x[i] > 0 ? g[i] : 0
void relu_backward(int64_t n, const float* x, const float* g, float* out);
void relu_backward(int64_t n, const double* x, const double* g, double* out);
float dot(int64_t n, const float* a, const float* b);
double dot(int64_t n, const double* a, const double* b);
float sum(int64_t n, const float* x);
double sum(int64_t n, const double* x);

}  // namespace vpf::kernels
