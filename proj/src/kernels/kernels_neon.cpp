#include "table_impl.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

// NEON kernels, 4-wide mirror of the AVX2 lane layout. vmulq+vaddq are kept
// separate (no vfmaq) so results stay bitwise equal to the scalar reference.

namespace freenoise::kernels {

namespace {

// 4x8 register tile; ascending-k accumulation per element, mul then add.
void matmul_neon(const float* a, const float* b, float* c, int m, int k, int n) {
  const int m4 = m & ~3;
  const int n8 = n & ~7;
  for (int i = 0; i < m4; i += 4) {
    const float* a0 = a + static_cast<size_t>(i) * k;
    const float* a1 = a0 + k;
    const float* a2 = a1 + k;
    const float* a3 = a2 + k;
    for (int j = 0; j < n8; j += 8) {
      float32x4_t c00 = vdupq_n_f32(0.0f), c01 = vdupq_n_f32(0.0f);
      float32x4_t c10 = vdupq_n_f32(0.0f), c11 = vdupq_n_f32(0.0f);
      float32x4_t c20 = vdupq_n_f32(0.0f), c21 = vdupq_n_f32(0.0f);
      float32x4_t c30 = vdupq_n_f32(0.0f), c31 = vdupq_n_f32(0.0f);
      const float* bp = b + j;
      for (int kk = 0; kk < k; ++kk, bp += n) {
        const float32x4_t b0 = vld1q_f32(bp);
        const float32x4_t b1 = vld1q_f32(bp + 4);
        float32x4_t av = vdupq_n_f32(a0[kk]);
        c00 = vaddq_f32(c00, vmulq_f32(av, b0));
        c01 = vaddq_f32(c01, vmulq_f32(av, b1));
        av = vdupq_n_f32(a1[kk]);
        c10 = vaddq_f32(c10, vmulq_f32(av, b0));
        c11 = vaddq_f32(c11, vmulq_f32(av, b1));
        av = vdupq_n_f32(a2[kk]);
        c20 = vaddq_f32(c20, vmulq_f32(av, b0));
        c21 = vaddq_f32(c21, vmulq_f32(av, b1));
        av = vdupq_n_f32(a3[kk]);
        c30 = vaddq_f32(c30, vmulq_f32(av, b0));
        c31 = vaddq_f32(c31, vmulq_f32(av, b1));
      }
      float* crow = c + static_cast<size_t>(i) * n + j;
      vst1q_f32(crow, c00);
      vst1q_f32(crow + 4, c01);
      vst1q_f32(crow + n, c10);
      vst1q_f32(crow + n + 4, c11);
      vst1q_f32(crow + 2 * n, c20);
      vst1q_f32(crow + 2 * n + 4, c21);
      vst1q_f32(crow + 3 * n, c30);
      vst1q_f32(crow + 3 * n + 4, c31);
    }
    for (int r = 0; r < 4; ++r) {
      const float* arow = a + static_cast<size_t>(i + r) * k;
      float* crow = c + static_cast<size_t>(i + r) * n;
      for (int j = n8; j < n; ++j) crow[j] = 0.0f;
      for (int kk = 0; kk < k; ++kk) {
        const float av = arow[kk];
        const float* brow = b + static_cast<size_t>(kk) * n;
        for (int j = n8; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  for (int i = m4; i < m; ++i) {
    const float* arow = a + static_cast<size_t>(i) * k;
    float* crow = c + static_cast<size_t>(i) * n;
    const int n4 = n & ~3;
    for (int j = 0; j < n4; j += 4) vst1q_f32(crow + j, vdupq_n_f32(0.0f));
    for (int j = n4; j < n; ++j) crow[j] = 0.0f;
    for (int kk = 0; kk < k; ++kk) {
      const float av = arow[kk];
      const float* brow = b + static_cast<size_t>(kk) * n;
      const float32x4_t vav = vdupq_n_f32(av);
      for (int j = 0; j < n4; j += 4) {
        float32x4_t acc = vld1q_f32(crow + j);
        acc = vaddq_f32(acc, vmulq_f32(vav, vld1q_f32(brow + j)));
        vst1q_f32(crow + j, acc);
      }
      for (int j = n4; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void axpy_neon(float* y, const float* x, float s, int n) {
  const int n4 = n & ~3;
  const float32x4_t vs = vdupq_n_f32(s);
  for (int i = 0; i < n4; i += 4) {
    float32x4_t acc = vld1q_f32(y + i);
    acc = vaddq_f32(acc, vmulq_f32(vs, vld1q_f32(x + i)));
    vst1q_f32(y + i, acc);
  }
  for (int i = n4; i < n; ++i) y[i] += s * x[i];
}

void vadd_neon(float* y, const float* x, int n) {
  const int n4 = n & ~3;
  for (int i = 0; i < n4; i += 4) {
    vst1q_f32(y + i, vaddq_f32(vld1q_f32(y + i), vld1q_f32(x + i)));
  }
  for (int i = n4; i < n; ++i) y[i] += x[i];
}

void vscale_neon(float* y, float s, int n) {
  const int n4 = n & ~3;
  const float32x4_t vs = vdupq_n_f32(s);
  for (int i = 0; i < n4; i += 4) {
    vst1q_f32(y + i, vmulq_f32(vld1q_f32(y + i), vs));
  }
  for (int i = n4; i < n; ++i) y[i] *= s;
}

void vdiv_neon(float* y, float d, int n) {
  const int n4 = n & ~3;
  const float32x4_t vd = vdupq_n_f32(d);
  for (int i = 0; i < n4; i += 4) {
    vst1q_f32(y + i, vdivq_f32(vld1q_f32(y + i), vd));
  }
  for (int i = n4; i < n; ++i) y[i] /= d;
}

void conv_tap2d_neon(float* dst, const float* src, float s, int frames, int h, int w, int sh,
                     int sw) {
  const float32x4_t vs = vdupq_n_f32(s);
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
      const int span = w1 - w0;
      const int v4 = span > 0 ? span & ~3 : 0;
      for (int x = 0; x < v4; x += 4) {
        float32x4_t acc = vld1q_f32(drow + w0 + x);
        acc = vaddq_f32(acc, vmulq_f32(vs, vld1q_f32(srow + w0 + sw + x)));
        vst1q_f32(drow + w0 + x, acc);
      }
      for (int x = w0 + v4; x < w1; ++x) drow[x] += s * srow[x + sw];
      for (int x = w1 > w0 ? w1 : w0; x < w; ++x) drow[x] += s * srow[w - 1];
    }
  }
}

}  // namespace

const Table& neon_table() {
  static const Table t{matmul_neon, axpy_neon, vadd_neon, vscale_neon, vdiv_neon,
                       conv_tap2d_neon};
  return t;
}

}  // namespace freenoise::kernels

#endif  // __aarch64__
