#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>

#include "freenoise/errors.hpp"
#include "freenoise/kernels.hpp"
#include "table_impl.hpp"

namespace freenoise {

namespace kernels {

namespace {

std::atomic<const Table*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::Scalar};

const Table& table_for(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::Avx2:
      return avx2_table();
#endif
#if defined(__aarch64__)
    case Backend::Neon:
      return neon_table();
#endif
    default:
      throw ConfigError(std::string("kernel backend '") + backend_name(b) +
                        "' is not supported on this CPU");
  }
}

void init_once() {
  if (g_table.load(std::memory_order_acquire)) return;
  Backend b = detect_backend();
  if (const char* env = std::getenv("FREENOISE_KERNELS")) {
    const Backend forced = backend_from_name(env);
    if (backend_supported(forced)) b = forced;
  }
  g_backend.store(b, std::memory_order_relaxed);
  g_table.store(&table_for(b), std::memory_order_release);
}

}  // namespace

Backend detect_backend() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") ? Backend::Avx2 : Backend::Scalar;
#elif defined(__aarch64__)
  return Backend::Neon;
#else
  return Backend::Scalar;
#endif
}

bool backend_supported(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Backend::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend active_backend() {
  init_once();
  return g_backend.load(std::memory_order_relaxed);
}

void set_backend(Backend backend) {
  if (!backend_supported(backend)) {
    throw ConfigError(std::string("kernel backend '") + backend_name(backend) +
                      "' is not supported on this CPU");
  }
  g_backend.store(backend, std::memory_order_relaxed);
  g_table.store(&table_for(backend), std::memory_order_release);
}

const char* backend_name(Backend backend) {
  switch (backend) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
  }
  return "?";
}

Backend backend_from_name(const std::string& name) {
  if (name == "scalar") return Backend::Scalar;
  if (name == "avx2") return Backend::Avx2;
  if (name == "neon") return Backend::Neon;
  if (name == "auto") return detect_backend();
  throw ConfigError("unknown kernel backend '" + name + "' (scalar|avx2|neon|auto)");
}

const Table& active() {
  init_once();
  return *g_table.load(std::memory_order_acquire);
}

}  // namespace kernels

// ============================================================================
// High-level operations
// ============================================================================

Array matmul(const Array& a, const Array& b) {
  if (a.ndim() != 2 || b.ndim() != 2) {
    throw ShapeError("matmul expects 2-D operands, got " + a.shape_str() + " x " + b.shape_str());
  }
  if (a.extent(1) != b.extent(0)) {
    throw ShapeError("matmul inner dimensions differ: " + a.shape_str() + " x " + b.shape_str());
  }
  Array c({a.extent(0), b.extent(1)});
  kernels::active().matmul(a.data(), b.data(), c.data(), a.extent(0), a.extent(1), b.extent(1));
  return c;
}

Array softmax(const Array& a, int axis) {
  if (axis < 0 || axis >= a.ndim()) {
    throw ShapeError("softmax axis " + std::to_string(axis) + " out of range for " + a.shape_str());
  }
  for (size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a.data()[i])) throw NumericError("softmax input contains NaN");
  }
  const int n = a.extent(axis);
  size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<size_t>(a.extent(i));
  for (int i = axis + 1; i < a.ndim(); ++i) inner *= static_cast<size_t>(a.extent(i));

  Array out = a;
  float* d = out.data();
  for (size_t o = 0; o < outer; ++o) {
    for (size_t in = 0; in < inner; ++in) {
      float* base = d + o * n * inner + in;
      float mx = base[0];
      for (int j = 1; j < n; ++j) mx = std::max(mx, base[j * inner]);
      float sum = 0.0f;
      for (int j = 0; j < n; ++j) {
        const float e = std::exp(base[j * inner] - mx);
        base[j * inner] = e;
        sum += e;
      }
      if (inner == 1) {
        kernels::active().vdiv(base, sum, n);
      } else {
        for (int j = 0; j < n; ++j) base[j * inner] /= sum;
      }
    }
  }
  return out;
}

Array conv_temporal(const Array& x, const Array& kernel) {
  if (x.ndim() != 4) throw ShapeError("conv_temporal expects x[C,M,H,W], got " + x.shape_str());
  if (kernel.ndim() != 3) {
    throw ShapeError("conv_temporal expects kernel[C_out,C,k], got " + kernel.shape_str());
  }
  if (kernel.extent(1) != x.extent(0)) {
    throw ShapeError("conv_temporal channel mismatch: x " + x.shape_str() + " kernel " +
                     kernel.shape_str());
  }
  const int taps = kernel.extent(2);
  if (taps % 2 == 0) {
    throw ConfigError("temporal kernel width must be odd, got " + std::to_string(taps));
  }
  const int c_in = x.extent(0), m = x.extent(1), h = x.extent(2), w = x.extent(3);
  const int c_out = kernel.extent(0);
  const int r = taps / 2;
  const int plane = h * w;
  Array out({c_out, m, h, w});
  const auto& tbl = kernels::active();
  // the frame axis plays the row role: clamp(m + tap - r) is replicate padding
  for (int co = 0; co < c_out; ++co) {
    float* dst = out.data() + co * out.stride(0);
    for (int ci = 0; ci < c_in; ++ci) {
      const float* src = x.data() + ci * x.stride(0);
      for (int tap = 0; tap < taps; ++tap) {
        tbl.conv_tap2d(dst, src, kernel(co, ci, tap), 1, m, plane, tap - r, 0);
      }
    }
  }
  return out;
}

Array conv_spatial(const Array& x, const Array& kernel) {
  if (x.ndim() != 4) throw ShapeError("conv_spatial expects x[C,M,H,W], got " + x.shape_str());
  if (kernel.ndim() != 4) {
    throw ShapeError("conv_spatial expects kernel[C_out,C,kh,kw], got " + kernel.shape_str());
  }
  if (kernel.extent(1) != x.extent(0)) {
    throw ShapeError("conv_spatial channel mismatch: x " + x.shape_str() + " kernel " +
                     kernel.shape_str());
  }
  const int kh = kernel.extent(2), kw = kernel.extent(3);
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ConfigError("spatial kernel extents must be odd, got " + std::to_string(kh) + "x" +
                      std::to_string(kw));
  }
  const int c_in = x.extent(0), m = x.extent(1), h = x.extent(2), w = x.extent(3);
  const int c_out = kernel.extent(0);
  const int rh = kh / 2, rw = kw / 2;
  Array out({c_out, m, h, w});
  const auto& tbl = kernels::active();
  for (int co = 0; co < c_out; ++co) {
    float* dst = out.data() + co * out.stride(0);
    for (int ci = 0; ci < c_in; ++ci) {
      const float* src = x.data() + ci * x.stride(0);
      for (int dh = 0; dh < kh; ++dh) {
        for (int dw = 0; dw < kw; ++dw) {
          tbl.conv_tap2d(dst, src, kernel(co, ci, dh, dw), m, h, w, dh - rh, dw - rw);
        }
      }
    }
  }
  return out;
}

Array layer_norm(const Array& x, int axis, const Array& gain, const Array& bias, float eps) {
  if (axis < 0 || axis >= x.ndim()) {
    throw ShapeError("layer_norm axis " + std::to_string(axis) + " out of range for " +
                     x.shape_str());
  }
  const int n = x.extent(axis);
  if (gain.ndim() != 1 || gain.extent(0) != n || bias.ndim() != 1 || bias.extent(0) != n) {
    throw ShapeError("layer_norm gain/bias must be 1-D of length " + std::to_string(n));
  }
  size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= static_cast<size_t>(x.extent(i));
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= static_cast<size_t>(x.extent(i));

  Array out = x;
  float* d = out.data();
  const float inv_n = 1.0f / static_cast<float>(n);
  for (size_t o = 0; o < outer; ++o) {
    for (size_t in = 0; in < inner; ++in) {
      float* base = d + o * n * inner + in;
      float mean = 0.0f;
      for (int j = 0; j < n; ++j) mean += base[j * inner];
      mean *= inv_n;
      float var = 0.0f;
      for (int j = 0; j < n; ++j) {
        const float c = base[j * inner] - mean;
        var += c * c;
      }
      var *= inv_n;
      const float inv_std = 1.0f / std::sqrt(var + eps);
      for (int j = 0; j < n; ++j) {
        base[j * inner] = ((base[j * inner] - mean) * inv_std) * gain(j) + bias(j);
      }
    }
  }
  return out;
}

Array silu(const Array& x) {
  Array out = x;
  for (size_t i = 0; i < out.size(); ++i) {
    const float v = out.data()[i];
    out.data()[i] = v / (1.0f + std::exp(-v));
  }
  return out;
}

Array linear(const Array& x, const Array& weight, const Array& bias) {
  if (weight.ndim() != 2) throw ShapeError("linear weight must be 2-D, got " + weight.shape_str());
  const int k = weight.extent(0), n = weight.extent(1);
  if (x.extent(x.ndim() - 1) != k) {
    throw ShapeError("linear input width " + std::to_string(x.extent(x.ndim() - 1)) +
                     " != weight rows " + std::to_string(k));
  }
  if (bias.ndim() != 1 || bias.extent(0) != n) {
    throw ShapeError("linear bias must be 1-D of length " + std::to_string(n));
  }
  const int rows = static_cast<int>(x.size()) / k;
  std::vector<int> out_shape = x.shape();
  out_shape.back() = n;
  Array out(std::move(out_shape));
  kernels::active().matmul(x.data(), weight.data(), out.data(), rows, k, n);
  for (int r = 0; r < rows; ++r) {
    kernels::active().vadd(out.data() + static_cast<size_t>(r) * n, bias.data(), n);
  }
  return out;
}

float sum_canonical(std::span<float> values) {
  std::sort(values.begin(), values.end());
  float s = 0.0f;
  for (float v : values) s += v;
  return s;
}

}  // namespace freenoise
