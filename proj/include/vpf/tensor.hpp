#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vpf {

enum class DType : uint8_t { f32 = 0, f64 = 1 };

size_t dtype_size(DType dt);
std::string_view dtype_name(DType dt);

/// Global precision switch: dtype used for newly created parameters and tensors.
DType default_dtype();
void set_default_dtype(DType dt);

/// Restores the previous default dtype on scope exit.
class PrecisionScope {
 public:
  explicit PrecisionScope(DType dt) : saved_(default_dtype()) { set_default_dtype(dt); }
  ~PrecisionScope() { set_default_dtype(saved_); }
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  DType saved_;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a forward result is non-finite while the NaN check is enabled.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of f32 or f64 values. Copies share the buffer;
/// values are treated as immutable once a tensor has been handed to an op.
class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled tensor.
  explicit Tensor(Shape shape, DType dtype = default_dtype());

  static Tensor zeros(Shape shape, DType dtype = default_dtype());
  static Tensor full(Shape shape, double value, DType dtype = default_dtype());
  static Tensor from_values(Shape shape, std::span<const double> values,
                            DType dtype = default_dtype());
  static Tensor scalar(double value, DType dtype = default_dtype());

  bool defined() const { return static_cast<bool>(buf_); }
  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int axis) const;
  int64_t numel() const { return numel_; }
  DType dtype() const { return dtype_; }

  template <class T>
  const T* data() const {
    check_type(sizeof(T));
    return static_cast<const T*>(buf_.get());
  }
  template <class T>
  T* mutable_data() {
    check_type(sizeof(T));
    return static_cast<T*>(buf_.get());
  }

  /// Element read by flat index, converted to double.
  double at(int64_t flat) const;
  double item() const;
  std::vector<double> to_vector() const;

  /// Same buffer, new shape; one extent may be -1.
  Tensor reshape(Shape shape) const;
  Tensor to(DType dtype) const;
  Tensor clone() const;
  bool all_finite() const;
  /// True when no other tensor shares this buffer.
  bool unique() const { return buf_.use_count() == 1; }
  const void* raw() const { return buf_.get(); }

 private:
  void check_type(size_t elem_size) const;

  Shape shape_;
  int64_t numel_ = 0;
  DType dtype_ = DType::f32;
  std::shared_ptr<void> buf_;
};

/// Invokes f with a value-initialized float or double tag matching dt.
template <class F>
decltype(auto) visit_dtype(DType dt, F&& f) {
  if (dt == DType::f64) return f(double{});
  return f(float{});
}

/// Enables a finiteness check on every op output (off by default).
void set_nan_check(bool enabled);
bool nan_check_enabled();

}  // namespace vpf
