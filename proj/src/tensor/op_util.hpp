#pragma once

#include <string>

#include "vpf/ops.hpp"

namespace vpf::detail {

inline void require_same_dtype(const Var& a, const Var& b, const char* op) {
  if (a.dtype() != b.dtype()) {
    throw std::invalid_argument(std::string(op) + ": dtype mismatch (" +
                                std::string(dtype_name(a.dtype())) + " vs " +
                                std::string(dtype_name(b.dtype())) + ")");
  }
}

inline int normalize_axis(int axis, int rank, const char* op) {
  const int a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(rank));
  }
  return a;
}

/// Splits shape around axis into (outer, extent, inner).
struct AxisSplit {
  int64_t outer = 1;
  int64_t n = 1;
  int64_t inner = 1;
};

inline AxisSplit split_at(const Shape& s, int axis) {
  AxisSplit r;
  for (int i = 0; i < axis; ++i) r.outer *= s[static_cast<size_t>(i)];
  r.n = s[static_cast<size_t>(axis)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

/// Sums g (of broadcast shape) down to `target`.
Tensor reduce_to_shape(const Tensor& g, const Shape& target);

/// Column sums of a [rows, cols] buffer into out[cols] (accumulating).
template <class T>
void add_column_sums(const T* src, int64_t rows, int64_t cols, T* out);

}  // namespace vpf::detail
