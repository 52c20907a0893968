#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "freenoise/errors.hpp"

namespace freenoise {

/// Dense row-major float32 array (last axis contiguous). This is the one
/// numeric container the whole library runs on; every extent must be >= 1.
class Array {
 public:
  Array() = default;

  /// Zero-filled array of the given shape.
  explicit Array(std::vector<int> shape);

  Array(std::vector<int> shape, std::vector<float> data);

  static Array zeros(std::vector<int> shape) { return Array(std::move(shape)); }
  static Array full(std::vector<int> shape, float value);

  int ndim() const { return static_cast<int>(shape_.size()); }
  const std::vector<int>& shape() const { return shape_; }
  int extent(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }

  size_t stride(int axis) const { return strides_[static_cast<size_t>(axis)]; }

  float& operator()(int i) { return data_[static_cast<size_t>(i)]; }
  float operator()(int i) const { return data_[static_cast<size_t>(i)]; }
  float& operator()(int i, int j) { return data_[i * strides_[0] + j]; }
  float operator()(int i, int j) const { return data_[i * strides_[0] + j]; }
  float& operator()(int i, int j, int k) {
    return data_[i * strides_[0] + j * strides_[1] + k];
  }
  float operator()(int i, int j, int k) const {
    return data_[i * strides_[0] + j * strides_[1] + k];
  }
  float& operator()(int i, int j, int k, int l) {
    return data_[i * strides_[0] + j * strides_[1] + k * strides_[2] + l];
  }
  float operator()(int i, int j, int k, int l) const {
    return data_[i * strides_[0] + j * strides_[1] + k * strides_[2] + l];
  }

  bool same_shape(const Array& other) const { return shape_ == other.shape_; }

  /// True when every element is finite.
  bool all_finite() const;

  /// "[2, 3, 4]" -- used in error messages.
  std::string shape_str() const;

  friend bool operator==(const Array& a, const Array& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void init_strides();

  std::vector<int> shape_;
  std::vector<size_t> strides_;  // strides_[i] = elements to skip per step of axis i (last axis implicit 1)
  std::vector<float> data_;
};

/// Bitwise equality of shape and payload.
bool bitwise_equal(const Array& a, const Array& b);

/// max |a - b| over all elements; shapes must match.
float max_abs_diff(const Array& a, const Array& b);

// Elementwise helpers; shapes must match where two arrays are involved.
Array add(const Array& a, const Array& b);
Array sub(const Array& a, const Array& b);
Array scaled(const Array& a, float s);
void add_inplace(Array& a, const Array& b);
void scale_inplace(Array& a, float s);

// Frame-axis helpers for video-shaped arrays [C, M, H, W].
Array slice_frames(const Array& video, int begin, int end);
void copy_frame(const Array& src, int src_frame, Array& dst, int dst_frame);

}  // namespace freenoise
