#include "table_impl.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

// AVX2 kernels. Lanes map to independent output elements, so each element
// sees the same mul/add sequence as the scalar reference (no FMA, no
// horizontal reductions) and results are bitwise identical to it.

namespace freenoise::kernels {

namespace {

// 4x16 register tile; every output element still accumulates in ascending k
// with separate mul/add, so results match the scalar reference bitwise.
void matmul_avx2(const float* a, const float* b, float* c, int m, int k, int n) {
  const int m4 = m & ~3;
  const int n16 = n & ~15;
  for (int i = 0; i < m4; i += 4) {
    const float* a0 = a + static_cast<size_t>(i) * k;
    const float* a1 = a0 + k;
    const float* a2 = a1 + k;
    const float* a3 = a2 + k;
    for (int j = 0; j < n16; j += 16) {
      __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
      __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
      __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
      __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
      const float* bp = b + j;
      for (int kk = 0; kk < k; ++kk, bp += n) {
        const __m256 b0 = _mm256_loadu_ps(bp);
        const __m256 b1 = _mm256_loadu_ps(bp + 8);
        __m256 av = _mm256_set1_ps(a0[kk]);
        c00 = _mm256_add_ps(c00, _mm256_mul_ps(av, b0));
        c01 = _mm256_add_ps(c01, _mm256_mul_ps(av, b1));
        av = _mm256_set1_ps(a1[kk]);
        c10 = _mm256_add_ps(c10, _mm256_mul_ps(av, b0));
        c11 = _mm256_add_ps(c11, _mm256_mul_ps(av, b1));
        av = _mm256_set1_ps(a2[kk]);
        c20 = _mm256_add_ps(c20, _mm256_mul_ps(av, b0));
        c21 = _mm256_add_ps(c21, _mm256_mul_ps(av, b1));
        av = _mm256_set1_ps(a3[kk]);
        c30 = _mm256_add_ps(c30, _mm256_mul_ps(av, b0));
        c31 = _mm256_add_ps(c31, _mm256_mul_ps(av, b1));
      }
      float* crow = c + static_cast<size_t>(i) * n + j;
      _mm256_storeu_ps(crow, c00);
      _mm256_storeu_ps(crow + 8, c01);
      _mm256_storeu_ps(crow + n, c10);
      _mm256_storeu_ps(crow + n + 8, c11);
      _mm256_storeu_ps(crow + 2 * n, c20);
      _mm256_storeu_ps(crow + 2 * n + 8, c21);
      _mm256_storeu_ps(crow + 3 * n, c30);
      _mm256_storeu_ps(crow + 3 * n + 8, c31);
    }
    // column remainder for this row block
    for (int r = 0; r < 4; ++r) {
      const float* arow = a + static_cast<size_t>(i + r) * k;
      float* crow = c + static_cast<size_t>(i + r) * n;
      for (int j = n16; j < n; ++j) crow[j] = 0.0f;
      for (int kk = 0; kk < k; ++kk) {
        const float av = arow[kk];
        const float* brow = b + static_cast<size_t>(kk) * n;
        for (int j = n16; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  // row remainder
  for (int i = m4; i < m; ++i) {
    const float* arow = a + static_cast<size_t>(i) * k;
    float* crow = c + static_cast<size_t>(i) * n;
    const int n8 = n & ~7;
    for (int j = 0; j < n8; j += 8) _mm256_storeu_ps(crow + j, _mm256_setzero_ps());
    for (int j = n8; j < n; ++j) crow[j] = 0.0f;
    for (int kk = 0; kk < k; ++kk) {
      const float av = arow[kk];
      const float* brow = b + static_cast<size_t>(kk) * n;
      const __m256 vav = _mm256_set1_ps(av);
      for (int j = 0; j < n8; j += 8) {
        __m256 acc = _mm256_loadu_ps(crow + j);
        acc = _mm256_add_ps(acc, _mm256_mul_ps(vav, _mm256_loadu_ps(brow + j)));
        _mm256_storeu_ps(crow + j, acc);
      }
      for (int j = n8; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void axpy_avx2(float* y, const float* x, float s, int n) {
  const int n8 = n & ~7;
  const __m256 vs = _mm256_set1_ps(s);
  for (int i = 0; i < n8; i += 8) {
    __m256 acc = _mm256_loadu_ps(y + i);
    acc = _mm256_add_ps(acc, _mm256_mul_ps(vs, _mm256_loadu_ps(x + i)));
    _mm256_storeu_ps(y + i, acc);
  }
  for (int i = n8; i < n; ++i) y[i] += s * x[i];
}

void vadd_avx2(float* y, const float* x, int n) {
  const int n8 = n & ~7;
  for (int i = 0; i < n8; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
  }
  for (int i = n8; i < n; ++i) y[i] += x[i];
}

void vscale_avx2(float* y, float s, int n) {
  const int n8 = n & ~7;
  const __m256 vs = _mm256_set1_ps(s);
  for (int i = 0; i < n8; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(y + i), vs));
  }
  for (int i = n8; i < n; ++i) y[i] *= s;
}

void vdiv_avx2(float* y, float d, int n) {
  const int n8 = n & ~7;
  const __m256 vd = _mm256_set1_ps(d);
  for (int i = 0; i < n8; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_div_ps(_mm256_loadu_ps(y + i), vd));
  }
  for (int i = n8; i < n; ++i) y[i] /= d;
}

void conv_tap2d_avx2(float* dst, const float* src, float s, int frames, int h, int w, int sh,
                     int sw) {
  const __m256 vs = _mm256_set1_ps(s);
  const size_t plane = static_cast<size_t>(h) * w;
  if (w == 8) {
    // one vector per row; the column shift+clamp becomes a lane permute
    alignas(32) int idx[8];
    for (int x = 0; x < 8; ++x) {
      int sx = x + sw;
      idx[x] = sx < 0 ? 0 : (sx > 7 ? 7 : sx);
    }
    const __m256i vidx = _mm256_load_si256(reinterpret_cast<const __m256i*>(idx));
    for (int f = 0; f < frames; ++f) {
      const float* sframe = src + f * plane;
      float* dframe = dst + f * plane;
      for (int y = 0; y < h; ++y) {
        int sy = y + sh;
        sy = sy < 0 ? 0 : (sy >= h ? h - 1 : sy);
        const __m256 row = _mm256_loadu_ps(sframe + static_cast<size_t>(sy) * 8);
        const __m256 shifted = _mm256_permutevar8x32_ps(row, vidx);
        float* drow = dframe + static_cast<size_t>(y) * 8;
        _mm256_storeu_ps(drow,
                         _mm256_add_ps(_mm256_loadu_ps(drow), _mm256_mul_ps(vs, shifted)));
      }
    }
    return;
  }
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
      const int v8 = span > 0 ? span & ~7 : 0;
      for (int x = 0; x < v8; x += 8) {
        __m256 acc = _mm256_loadu_ps(drow + w0 + x);
        acc = _mm256_add_ps(acc, _mm256_mul_ps(vs, _mm256_loadu_ps(srow + w0 + sw + x)));
        _mm256_storeu_ps(drow + w0 + x, acc);
      }
      for (int x = w0 + v8; x < w1; ++x) drow[x] += s * srow[x + sw];
      for (int x = w1 > w0 ? w1 : w0; x < w; ++x) drow[x] += s * srow[w - 1];
    }
  }
}

}  // namespace

const Table& avx2_table() {
  static const Table t{matmul_avx2, axpy_avx2, vadd_avx2, vscale_avx2, vdiv_avx2,
                       conv_tap2d_avx2};
  return t;
}

}  // namespace freenoise::kernels

#endif  // x86_64
