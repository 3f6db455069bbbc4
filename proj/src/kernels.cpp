#include "cldnet/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace cldnet::kernels {

namespace ref {

void sgemm_acc(const float* a, const float* b, float* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<std::size_t>(i) * n;
    const float* arow = a + static_cast<std::size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const float av = arow[p];
      const float* brow = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
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
    for (int c = 0; c < wdt; ++c) {
      float acc = 0.0f;
      for (int kr = 0; kr < 3; ++kr) {
        const int rr = r + (kr - 1) * d;
        if (rr < 0 || rr >= h) continue;
        for (int kc = 0; kc < 3; ++kc) {
          const int cc = c + (kc - 1) * d;
          if (cc < 0 || cc >= wdt) continue;
          acc += w[kr * 3 + kc] * x[static_cast<std::size_t>(rr) * wdt + cc];
        }
      }
      y[static_cast<std::size_t>(r) * wdt + c] = acc;
    }
  }
}

void axpy(float a, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace ref

namespace {

Backend pick_initial() {
  if (const char* env = std::getenv("CLDNET_KERNEL_BACKEND")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Backend::avx2;
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

Backend g_backend = pick_initial();

}  // namespace

bool avx2_supported() {
#if defined(CLDNET_HAVE_AVX2_BUILD)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_supported()) b = Backend::scalar;
  g_backend = b;
}

void sgemm(const float* a, const float* b, float* c, int m, int k, int n) {
#if defined(CLDNET_HAVE_AVX2_BUILD)
  if (g_backend == Backend::avx2) return avx2::sgemm(a, b, c, m, k, n);
#endif
  ref::sgemm(a, b, c, m, k, n);
}

void sgemm_acc(const float* a, const float* b, float* c, int m, int k, int n) {
#if defined(CLDNET_HAVE_AVX2_BUILD)
  if (g_backend == Backend::avx2) return avx2::sgemm_acc(a, b, c, m, k, n);
#endif
  ref::sgemm_acc(a, b, c, m, k, n);
}

void dwconv3x3(const float* x, const float* w, float* y,
               int h, int wdt, int dilation) {
#if defined(CLDNET_HAVE_AVX2_BUILD)
  if (g_backend == Backend::avx2) return avx2::dwconv3x3(x, w, y, h, wdt, dilation);
#endif
  ref::dwconv3x3(x, w, y, h, wdt, dilation);
}

void axpy(float a, const float* x, float* y, std::size_t n) {
#if defined(CLDNET_HAVE_AVX2_BUILD)
  if (g_backend == Backend::avx2) return avx2::axpy(a, x, y, n);
#endif
  ref::axpy(a, x, y, n);
}

}  // namespace cldnet::kernels
