#pragma once

#include <span>
#include <string>

#include "freenoise/array.hpp"

namespace freenoise {

// ============================================================================
// Backend dispatch
// ============================================================================
//
// Every arithmetic inner loop has a scalar reference implementation plus
// optional AVX2 / NEON variants selected once at runtime. The vector variants
// keep the per-element accumulation order of the scalar reference (they
// vectorize across independent outputs, never inside a reduction), so all
// backends produce bitwise-identical results. Equivalence tests assert that.

namespace kernels {

enum class Backend { Scalar, Avx2, Neon };

/// Best backend this CPU supports.
Backend detect_backend();

/// Active table; initialized from detect_backend() or FREENOISE_KERNELS
/// (scalar|avx2|neon|auto) on first use.
Backend active_backend();

/// Force a backend. Throws ConfigError if this CPU cannot run it.
void set_backend(Backend backend);

bool backend_supported(Backend backend);

const char* backend_name(Backend backend);
Backend backend_from_name(const std::string& name);  // also accepts "auto"

/// Raw kernel table. a,b,c are dense row-major buffers.
struct Table {
  // c[m,n] = sum_k a[m,k] * b[k,n], each element accumulated in ascending k.
  void (*matmul)(const float* a, const float* b, float* c, int m, int k, int n);
  // y[i] += s * x[i]
  void (*axpy)(float* y, const float* x, float s, int n);
  // y[i] += x[i]
  void (*vadd)(float* y, const float* x, int n);
  // y[i] *= s
  void (*vscale)(float* y, float s, int n);
  // y[i] /= d (true division; not multiplication by reciprocal)
  void (*vdiv)(float* y, float d, int n);
  // one shifted-and-scaled conv tap over `frames` consecutive [h,w] planes
  // with replicate padding: dst[f,y,x] += s * src[f, clamp(y+sh), clamp(x+sw)]
  void (*conv_tap2d)(float* dst, const float* src, float s, int frames, int h, int w, int sh,
                     int sw);
};

const Table& active();

}  // namespace kernels

// ============================================================================
// Numeric operations
// ============================================================================

/// [m,k] x [k,n] -> [m,n]; accumulation order fixed ascending k.
Array matmul(const Array& a, const Array& b);

/// Softmax along `axis` with max-subtraction. Throws NumericError on NaN.
Array softmax(const Array& a, int axis);

/// 1-D convolution along the frame axis of x[C,M,H,W] with kernel
/// [C_out,C,k], k odd, replicate padding; output [C_out,M,H,W].
Array conv_temporal(const Array& x, const Array& kernel);

/// 2-D convolution over each frame of x[C,M,H,W] with kernel
/// [C_out,C,kh,kw], kh/kw odd, replicate padding; output [C_out,M,H,W].
Array conv_spatial(const Array& x, const Array& kernel);

/// Normalize along `axis` to zero mean / unit variance, then scale and shift
/// by gain/bias (1-D arrays of length extent(axis)).
Array layer_norm(const Array& x, int axis, const Array& gain, const Array& bias,
                 float eps = 1e-5f);

Array silu(const Array& x);

/// x[..., k] -> [..., n] with weight [k, n] and bias [n]; the leading axes of
/// x are flattened into rows.
Array linear(const Array& x, const Array& weight, const Array& bias);

/// Serial sum after sorting the buffer ascending (in place). The result
/// depends only on the multiset of values, so callers that feed it a
/// permuted buffer get the identical float back.
float sum_canonical(std::span<float> values);

}  // namespace freenoise
