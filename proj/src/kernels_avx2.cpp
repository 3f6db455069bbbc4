#include "cldnet/kernels.hpp"

#if defined(CLDNET_HAVE_AVX2_BUILD)

#include <immintrin.h>

#include <cstring>

namespace cldnet::kernels::avx2 {

void sgemm_acc(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * n;
    const float* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const float av = arow[p];
      const float* brow = b + static_cast<std::size_t>(p) * n;
      const __m256 va = _mm256_set1_ps(av);
      int j = 0;
      for (; j + 8 <= n; j += 8) {
        __m256 vc = _mm256_loadu_ps(crow + j);
        vc = _mm256_fmadd_ps(va, _mm256_loadu_ps(brow + j), vc);
        _mm256_storeu_ps(crow + j, vc);
      }
      // Tail lanes use fmaf so rounding matches the vector body; an
      // element's bits must not depend on its column position.
      for (; j < n; ++j) crow[j] = __builtin_fmaf(av, brow[j], crow[j]);
    }
  }
}

void sgemm(const float* a, const float* b, float* c, int m, int k, int n) {
  std::memset(c, 0, sizeof(float) * static_cast<std::size_t>(m) * n);
  sgemm_acc(a, b, c, m, k, n);
}

void dwconv3x3(const float* x, const float* w, float* y,
               int h, int wdt, int dilation) {
  const int d = dilation;
  for (int r = 0; r < h; ++r) {
    float* yrow = y + static_cast<std::size_t>(r) * wdt;
    // Columns [d, wdt-d) of interior rows have all taps in range.
    const bool row_interior = (r - d >= 0) && (r + d < h);
    int c = 0;
    auto edge_pixel = [&](int col) {
      const bool interior = row_interior && (col - d >= 0) && (col + d < wdt);
      if (interior) {
        // Same rounding sequence as the vector body: one rounded product,
        // then fused multiply-adds in tap order.
        const std::size_t base = static_cast<std::size_t>(r) * wdt + col;
        const std::ptrdiff_t rs = static_cast<std::ptrdiff_t>(wdt) * d;
        const float* p = x + base;
        float acc = w[0] * p[-rs - d];
        acc = __builtin_fmaf(w[1], p[-rs], acc);
        acc = __builtin_fmaf(w[2], p[-rs + d], acc);
        acc = __builtin_fmaf(w[3], p[-d], acc);
        acc = __builtin_fmaf(w[4], p[0], acc);
        acc = __builtin_fmaf(w[5], p[d], acc);
        acc = __builtin_fmaf(w[6], p[rs - d], acc);
        acc = __builtin_fmaf(w[7], p[rs], acc);
        acc = __builtin_fmaf(w[8], p[rs + d], acc);
        yrow[col] = acc;
        return;
      }
      float acc = 0.0f;
      for (int kr = 0; kr < 3; ++kr) {
        const int rr = r + (kr - 1) * d;
        if (rr < 0 || rr >= h) continue;
        for (int kc = 0; kc < 3; ++kc) {
          const int cc = col + (kc - 1) * d;
          if (cc < 0 || cc >= wdt) continue;
          acc += w[kr * 3 + kc] * x[static_cast<std::size_t>(rr) * wdt + cc];
        }
      }
      yrow[col] = acc;
    };
    if (!row_interior) {
      for (c = 0; c < wdt; ++c) edge_pixel(c);
      continue;
    }
    for (c = 0; c < d && c < wdt; ++c) edge_pixel(c);
    const float* r0 = x + static_cast<std::size_t>(r - d) * wdt;
    const float* r1 = x + static_cast<std::size_t>(r) * wdt;
    const float* r2 = x + static_cast<std::size_t>(r + d) * wdt;
    for (; c + 8 <= wdt - d; c += 8) {
      __m256 acc = _mm256_mul_ps(_mm256_set1_ps(w[0]), _mm256_loadu_ps(r0 + c - d));
      acc = _mm256_fmadd_ps(_mm256_set1_ps(w[1]), _mm256_loadu_ps(r0 + c), acc);
      acc = _mm256_fmadd_ps(_mm256_set1_ps(w[2]), _mm256_loadu_ps(r0 + c + d), acc);
      acc = _mm256_fmadd_ps(_mm256_set1_ps(w[3]), _mm256_loadu_ps(r1 + c - d), acc);
      acc = _mm256_fmadd_ps(_mm256_set1_ps(w[4]), _mm256_loadu_ps(r1 + c), acc);
      acc = _mm256_fmadd_ps(_mm256_set1_ps(w[5]), _mm256_loadu_ps(r1 + c + d), acc);
      acc = _mm256_fmadd_ps(_mm256_set1_ps(w[6]), _mm256_loadu_ps(r2 + c - d), acc);
      acc = _mm256_fmadd_ps(_mm256_set1_ps(w[7]), _mm256_loadu_ps(r2 + c), acc);
      acc = _mm256_fmadd_ps(_mm256_set1_ps(w[8]), _mm256_loadu_ps(r2 + c + d), acc);
      _mm256_storeu_ps(yrow + c, acc);
    }
    for (; c < wdt; ++c) edge_pixel(c);
  }
}

void axpy(float a, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vy = _mm256_loadu_ps(y + i);
    vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
    _mm256_storeu_ps(y + i, vy);
  }
  for (; i < n; ++i) y[i] = __builtin_fmaf(a, x[i], y[i]);
}

}  // namespace cldnet::kernels::avx2

#endif  // CLDNET_HAVE_AVX2_BUILD
