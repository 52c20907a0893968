#include "table_impl.hpp"

// Reference kernels. These define the numeric contract: every other backend
// must reproduce them bitwise, which pins the accumulation order per output
// element (ascending k for matmul, caller order for axpy chains).

namespace freenoise::kernels {

namespace {

void matmul_scalar(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<size_t>(i) * k;
    float* crow = c + static_cast<size_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = 0.0f;
    for (int kk = 0; kk < k; ++kk) {
      const float av = arow[kk];
      const float* brow = b + static_cast<size_t>(kk) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void axpy_scalar(float* y, const float* x, float s, int n) {
  for (int i = 0; i < n; ++i) y[i] += s * x[i];
}

void vadd_scalar(float* y, const float* x, int n) {
  for (int i = 0; i < n; ++i) y[i] += x[i];
}

void vscale_scalar(float* y, float s, int n) {
  for (int i = 0; i < n; ++i) y[i] *= s;
}

void vdiv_scalar(float* y, float d, int n) {
  for (int i = 0; i < n; ++i) y[i] /= d;
}

void conv_tap2d_scalar(float* dst, const float* src, float s, int frames, int h, int w, int sh,
                       int sw) {
  const size_t plane = static_cast<size_t>(h) * w;
  for (int f = 0; f < frames; ++f) {
    const float* sframe = src + f * plane;
    float* dframe = dst + f * plane;
    for (int y = 0; y < h; ++y) {
      int sy = y + sh;
      sy = sy < 0 ? 0 : (sy >= h ? h - 1 : sy);
      const float* srow = sframe + static_cast<size_t>(sy) * w;
      float* drow = dframe + static_cast<size_t>(y) * w;
      const int w0 = sw < 0 ? -sw : 0;
      const int w1 = sw > 0 ? w - sw : w;
      for (int x = 0; x < w0; ++x) drow[x] += s * srow[0];
      for (int x = w0; x < w1; ++x) drow[x] += s * srow[x + sw];
      for (int x = w1 > w0 ? w1 : w0; x < w; ++x) drow[x] += s * srow[w - 1];
    }
  }
}

}  // namespace

const Table& scalar_table() {
  static const Table t{matmul_scalar, axpy_scalar, vadd_scalar, vscale_scalar, vdiv_scalar,
                       conv_tap2d_scalar};
  return t;
}

}  // namespace freenoise::kernels
