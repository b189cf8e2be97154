#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernel_table.hpp"
#include "vpf/kernels.hpp"

namespace vpf::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() {
  if (const char* env = std::getenv("VPFK_SIMD")) {
    if (std::string(env) == "scalar") return Isa::scalar;
  }
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

struct State {
  Isa isa = initial_isa();
  const detail::Table* table = nullptr;
  State() { table = isa == Isa::avx2 ? &detail::avx2_table() : &detail::scalar_table(); }
};

State& state() {
  static State s;
  return s;
}

const detail::Ops<float>& f32() { return state().table->f32; }
const detail::Ops<double>& f64() { return state().table->f64; }

}  // namespace

Isa active_isa() { return state().isa; }

bool isa_supported(Isa isa) { return isa == Isa::scalar || cpu_has_avx2(); }

void set_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::invalid_argument("kernel variant " + std::string(isa_name(isa)) +
                                " is not supported on this CPU");
  }
  state().isa = isa;
  state().table = isa == Isa::avx2 ? &detail::avx2_table() : &detail::scalar_table();
}

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void gemm(bool ta, bool tb, int64_t m, int64_t n, int64_t k, float alpha, const float* a,
          int64_t lda, const float* b, int64_t ldb, float beta, float* c, int64_t ldc) {
  f32().gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}
void gemm(bool ta, bool tb, int64_t m, int64_t n, int64_t k, double alpha, const double* a,
          int64_t lda, const double* b, int64_t ldb, double beta, double* c, int64_t ldc) {
  f64().gemm(ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void add(int64_t n, const float* a, const float* b, float* out) { f32().add(n, a, b, out); }
void add(int64_t n, const double* a, const double* b, double* out) { f64().add(n, a, b, out); }
void mul(int64_t n, const float* a, const float* b, float* out) { f32().mul(n, a, b, out); }
void mul(int64_t n, const double* a, const double* b, double* out) { f64().mul(n, a, b, out); }
void axpy(int64_t n, float alpha, const float* x, float* y) { f32().axpy(n, alpha, x, y); }
void axpy(int64_t n, double alpha, const double* x, double* y) { f64().axpy(n, alpha, x, y); }
void scale(int64_t n, float alpha, const float* x, float* out) { f32().scale(n, alpha, x, out); }
void scale(int64_t n, double alpha, const double* x, double* out) {
  f64().scale(n, alpha, x, out);
}
void relu(int64_t n, const float* x, float* out) { f32().relu(n, x, out); }
void relu(int64_t n, const double* x, double* out) { f64().relu(n, x, out); }
void relu_backward(int64_t n, const float* x, const float* g, float* out) {
  f32().relu_backward(n, x, g, out);
}
void relu_backward(int64_t n, const double* x, const double* g, double* out) {
  f64().relu_backward(n, x, g, out);
}
float dot(int64_t n, const float* a, const float* b) { return f32().dot(n, a, b); }
double dot(int64_t n, const double* a, const double* b) { return f64().dot(n, a, b); }
float sum(int64_t n, const float* x) { return f32().sum(n, x); }
double sum(int64_t n, const double* x) { return f64().sum(n, x); }

}  // namespace vpf::kernels
