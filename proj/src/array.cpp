#include "freenoise/array.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "freenoise/kernels.hpp"

namespace freenoise {

Array::Array(std::vector<int> shape) : shape_(std::move(shape)) {
  size_t total = 1;
  for (int e : shape_) {
    if (e < 1) throw ShapeError("array extent must be >= 1, got " + std::to_string(e));
    total *= static_cast<size_t>(e);
  }
  if (shape_.empty()) throw ShapeError("array must have at least one axis");
  data_.assign(total, 0.0f);
  init_strides();
}

Array::Array(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  size_t total = 1;
  for (int e : shape_) {
    if (e < 1) throw ShapeError("array extent must be >= 1, got " + std::to_string(e));
    total *= static_cast<size_t>(e);
  }
  if (shape_.empty()) throw ShapeError("array must have at least one axis");
  if (total != data_.size()) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape product " + std::to_string(total));
  }
  init_strides();
}

Array Array::full(std::vector<int> shape, float value) {
  Array a(std::move(shape));
  std::fill(a.data_.begin(), a.data_.end(), value);
  return a;
}

void Array::init_strides() {
  strides_.assign(shape_.size(), 1);
  for (int i = static_cast<int>(shape_.size()) - 2; i >= 0; --i) {
    strides_[i] = strides_[i + 1] * static_cast<size_t>(shape_[i + 1]);
  }
}

bool Array::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Array::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ", ";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

bool bitwise_equal(const Array& a, const Array& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

float max_abs_diff(const Array& a, const Array& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("max_abs_diff shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
  }
  float m = 0.0f;
  for (size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
  }
  return m;
}

Array add(const Array& a, const Array& b) {
  Array out = a;
  add_inplace(out, b);
  return out;
}

Array sub(const Array& a, const Array& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("sub shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
  }
  Array out = a;
  for (size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

Array scaled(const Array& a, float s) {
  Array out = a;
  scale_inplace(out, s);
  return out;
}

void add_inplace(Array& a, const Array& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("add shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
  }
  kernels::active().vadd(a.data(), b.data(), static_cast<int>(a.size()));
}

void scale_inplace(Array& a, float s) {
  kernels::active().vscale(a.data(), s, static_cast<int>(a.size()));
}

Array slice_frames(const Array& video, int begin, int end) {
  if (video.ndim() != 4) throw ShapeError("slice_frames expects [C,M,H,W], got " + video.shape_str());
  const int c = video.extent(0), m = video.extent(1), h = video.extent(2), w = video.extent(3);
  if (begin < 0 || end > m || begin >= end) {
    throw ShapeError("invalid frame range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") for " + std::to_string(m) + " frames");
  }
  Array out({c, end - begin, h, w});
  const size_t plane = static_cast<size_t>(h) * w;
  for (int ci = 0; ci < c; ++ci) {
    const float* src = video.data() + ci * video.stride(0) + begin * plane;
    float* dst = out.data() + ci * out.stride(0);
    std::memcpy(dst, src, static_cast<size_t>(end - begin) * plane * sizeof(float));
  }
  return out;
}

void copy_frame(const Array& src, int src_frame, Array& dst, int dst_frame) {
  if (src.ndim() != 4 || dst.ndim() != 4) throw ShapeError("copy_frame expects [C,M,H,W] arrays");
  if (src.extent(0) != dst.extent(0) || src.extent(2) != dst.extent(2) ||
      src.extent(3) != dst.extent(3)) {
    throw ShapeError("copy_frame shape mismatch: " + src.shape_str() + " vs " + dst.shape_str());
  }
  const int c = src.extent(0);
  const size_t plane = static_cast<size_t>(src.extent(2)) * src.extent(3);
  for (int ci = 0; ci < c; ++ci) {
    std::memcpy(dst.data() + ci * dst.stride(0) + dst_frame * plane,
                src.data() + ci * src.stride(0) + src_frame * plane, plane * sizeof(float));
  }
}

}  // namespace freenoise
