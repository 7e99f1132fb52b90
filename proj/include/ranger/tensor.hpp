// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ranger/numerics.hpp"

namespace ranger {

using Shape = std::vector<std::int64_t>;

inline std::int64_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense element container. Float32 tensors keep `float`s; fixed-point
/// tensors keep sign-extended raw integers that are always inside the
/// format's range.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, NumericFormat format) : shape_(std::move(shape)), format_(format) {
    const auto n = static_cast<std::size_t>(element_count(shape_));
    if (format_.is_float())
      f32_.assign(n, 0.0f);
    else
      fixed_.assign(n, 0);
  }

  template <class T>
  static Tensor from_values(Shape shape, std::span<const T> values,
                            NumericFormat format = NumericFormat::float32()) {
    Tensor t(std::move(shape), format);
    if (values.size() != t.size())
      throw Error("tensor of shape " + shape_string(t.shape_) + " needs " +
                  std::to_string(t.size()) + " values, got " + std::to_string(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) t.set_value(i, static_cast<double>(values[i]));
    return t;
  }

  static Tensor from_values(Shape shape, std::initializer_list<double> values,
                            NumericFormat format = NumericFormat::float32()) {
    return from_values<double>(std::move(shape), std::span<const double>(values.begin(), values.size()),
                               format);
  }

  const Shape& shape() const { return shape_; }
  NumericFormat format() const { return format_; }
  std::size_t size() const { return format_.is_float() ? f32_.size() : fixed_.size(); }
  bool empty() const { return size() == 0; }

  double value(std::size_t i) const {
    return format_.is_float() ? static_cast<double>(f32_[i]) : from_fixed(fixed_[i], format_);
  }

  /// Encodes with round-half-away and saturation.
  void set_value(std::size_t i, double v) {
    if (format_.is_float())
      f32_[i] = static_cast<float>(v);
    else
      fixed_[i] = to_fixed(v, format_);
  }

  RawBits raw(std::size_t i) const {
    return format_.is_float() ? std::bit_cast<RawBits>(f32_[i]) : fixed_to_bits(fixed_[i], format_);
  }

  void set_raw(std::size_t i, RawBits bits) {
    if (format_.is_float())
      f32_[i] = std::bit_cast<float>(bits);
    else
      fixed_[i] = bits_to_fixed(bits, format_);
  }

  std::span<float> f32() { return f32_; }
  std::span<const float> f32() const { return f32_; }
  std::span<std::int32_t> fixed() { return fixed_; }
  std::span<const std::int32_t> fixed() const { return fixed_; }

  std::vector<double> to_doubles() const {
    std::vector<double> out(size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(i);
    return out;
  }

  Tensor converted(NumericFormat format) const {
    if (format == format_) return *this;
    Tensor t(shape_, format);
    for (std::size_t i = 0; i < size(); ++i) t.set_value(i, value(i));
    return t;
  }

  /// Changes the shape without touching elements.
  void reshape(Shape shape) {
    if (element_count(shape) != element_count(shape_))
      throw Error("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    shape_ = std::move(shape);
  }

  /// Re-dimensions storage, reusing the allocation.
  void reset(const Shape& shape, NumericFormat format) {
    shape_ = shape;
    format_ = format;
    const auto n = static_cast<std::size_t>(element_count(shape_));
    if (format_.is_float()) {
      f32_.resize(n);
      fixed_.clear();
    } else {
      fixed_.resize(n);
      f32_.clear();
    }
  }

  bool all_finite() const {
    return std::all_of(f32_.begin(), f32_.end(), [](float v) { return std::isfinite(v); });
  }

  /// Exact equality of shape, format and element bits.
  bool bit_equal(const Tensor& other) const {
    if (format_ != other.format_ || shape_ != other.shape_) return false;
    if (format_.is_float())
      return std::memcmp(f32_.data(), other.f32_.data(), f32_.size() * sizeof(float)) == 0;
    return fixed_ == other.fixed_;
  }

 private:
  Shape shape_;
  NumericFormat format_;
  std::vector<float> f32_;
  std::vector<std::int32_t> fixed_;
};

}  // namespace ranger
