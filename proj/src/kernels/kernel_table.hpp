#pragma once

#include <cstdint>

namespace vpf::kernels::detail {

template <class T>
struct Ops {
  void (*gemm)(bool, bool, int64_t, int64_t, int64_t, T, const T*, int64_t, const T*, int64_t,
               T, T*, int64_t);
  void (*add)(int64_t, const T*, const T*, T*);
  void (*mul)(int64_t, const T*, const T*, T*);
  void (*axpy)(int64_t, T, const T*, T*);
  void (*scale)(int64_t, T, const T*, T*);
  void (*relu)(int64_t, const T*, T*);
  void (*relu_backward)(int64_t, const T*, const T*, T*);
  T (*dot)(int64_t, const T*, const T*);
  T (*sum)(int64_t, const T*);
};

struct Table {
  Ops<float> f32;
  Ops<double> f64;
};

const Table& scalar_table();
// Only valid to call when the CPU supports AVX2 and FMA.
const Table& avx2_table();

}  // namespace vpf::kernels::detail
