#include "vpf/tensor.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <sstream>

namespace vpf {
namespace {

std::atomic<DType> g_default_dtype{DType::f32};
std::atomic<bool> g_nan_check{false};

std::shared_ptr<void> allocate(size_t bytes) {
  const size_t rounded = ((bytes + 63) / 64) * 64;
  void* p = std::aligned_alloc(64, rounded == 0 ? 64 : rounded);
  if (p == nullptr) throw std::bad_alloc();
  std::memset(p, 0, rounded == 0 ? 64 : rounded);
  return std::shared_ptr<void>(p, [](void* q) { std::free(q); });
}

}  // namespace

size_t dtype_size(DType dt) { return dt == DType::f64 ? 8 : 4; }
std::string_view dtype_name(DType dt) { return dt == DType::f64 ? "f64" : "f32"; }
DType default_dtype() { return g_default_dtype.load(); }
void set_default_dtype(DType dt) { g_default_dtype.store(dt); }
void set_nan_check(bool enabled) { g_nan_check.store(enabled); }
bool nan_check_enabled() { return g_nan_check.load(); }

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t e : shape) n *= e;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, DType dtype) : shape_(std::move(shape)), dtype_(dtype) {
  for (int64_t e : shape_) {
    if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape_));
  }
  numel_ = shape_numel(shape_);
  buf_ = allocate(static_cast<size_t>(numel_) * dtype_size(dtype_));
}

Tensor Tensor::zeros(Shape shape, DType dtype) { return Tensor(std::move(shape), dtype); }

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  Tensor t(std::move(shape), dtype);
  visit_dtype(dtype, [&](auto tag) {
    using T = decltype(tag);
    T* p = t.mutable_data<T>();
    for (int64_t i = 0; i < t.numel(); ++i) p[i] = static_cast<T>(value);
  });
  return t;
}

Tensor Tensor::from_values(Shape shape, std::span<const double> values, DType dtype) {
  Tensor t(std::move(shape), dtype);
  if (static_cast<int64_t>(values.size()) != t.numel()) {
    throw ShapeError("from_values: " + std::to_string(values.size()) +
                     " values for shape " + shape_str(t.shape()));
  }
  visit_dtype(dtype, [&](auto tag) {
    using T = decltype(tag);
    T* p = t.mutable_data<T>();
    for (int64_t i = 0; i < t.numel(); ++i) p[i] = static_cast<T>(values[i]);
  });
  return t;
}

Tensor Tensor::scalar(double value, DType dtype) { return full({1}, value, dtype); }

int64_t Tensor::dim(int axis) const {
  const int r = rank();
  if (axis < 0) axis += r;
  if (axis < 0 || axis >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(shape_));
  }
  return shape_[static_cast<size_t>(axis)];
}

void Tensor::check_type(size_t elem_size) const {
  if (!buf_) throw std::logic_error("access to undefined tensor");
  if (elem_size != dtype_size(dtype_)) {
    throw std::logic_error("tensor element access with wrong type for dtype " +
                           std::string(dtype_name(dtype_)));
  }
}

double Tensor::at(int64_t flat) const {
  if (flat < 0 || flat >= numel_) throw std::out_of_range("tensor index out of range");
  return dtype_ == DType::f64 ? data<double>()[flat] : static_cast<double>(data<float>()[flat]);
}

double Tensor::item() const {
  if (numel_ != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  return at(0);
}

std::vector<double> Tensor::to_vector() const {
  std::vector<double> out(static_cast<size_t>(numel_));
  visit_dtype(dtype_, [&](auto tag) {
    using T = decltype(tag);
    const T* p = data<T>();
    for (int64_t i = 0; i < numel_; ++i) out[static_cast<size_t>(i)] = p[i];
  });
  return out;
}

Tensor Tensor::reshape(Shape shape) const {
  int64_t known = 1;
  int infer = -1;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      if (infer >= 0) throw ShapeError("reshape: more than one -1 extent");
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0 && known > 0 && numel_ % known == 0) shape[static_cast<size_t>(infer)] = numel_ / known;
  if (shape_numel(shape) != numel_) {
    throw ShapeError("reshape: cannot view " + shape_str(shape_) + " as " + shape_str(shape));
  }
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

Tensor Tensor::to(DType dtype) const {
  if (dtype == dtype_) return *this;
  Tensor t(shape_, dtype);
  visit_dtype(dtype_, [&](auto src_tag) {
    using S = decltype(src_tag);
    visit_dtype(dtype, [&](auto dst_tag) {
      using D = decltype(dst_tag);
      const S* s = data<S>();
      D* d = t.mutable_data<D>();
      for (int64_t i = 0; i < numel_; ++i) d[i] = static_cast<D>(s[i]);
    });
  });
  return t;
}

Tensor Tensor::clone() const {
  Tensor t(shape_, dtype_);
  std::memcpy(t.buf_.get(), buf_.get(), static_cast<size_t>(numel_) * dtype_size(dtype_));
  return t;
}

bool Tensor::all_finite() const {
  bool ok = true;
  visit_dtype(dtype_, [&](auto tag) {
    using T = decltype(tag);
    const T* p = data<T>();
    for (int64_t i = 0; i < numel_ && ok; ++i) ok = std::isfinite(p[i]);
  });
  return ok;
}

}  // namespace vpf
