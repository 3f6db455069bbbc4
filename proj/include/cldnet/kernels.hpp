#pragma once
// Runtime-dispatched arithmetic kernels. Scalar reference implementations
// live in kernels.cpp; AVX2 variants in kernels_avx2.cpp. Both share the
// same per-element accumulation order so tiled and untiled evaluation of
// the same pixels produce identical bits within one backend.

#include <cstddef>

namespace cldnet::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
void set_backend(Backend b);
bool avx2_supported();

// C[M x N] = A[M x K] * B[K x N], row-major, C overwritten.
void sgemm(const float* a, const float* b, float* c, int m, int k, int n);

// C += A * B
void sgemm_acc(const float* a, const float* b, float* c, int m, int k, int n);

// Depthwise 3x3 convolution, one channel plane, stride 1, zero padding
// chosen so output size equals input size (pad = dilation).
void dwconv3x3(const float* x, const float* w, float* y,
               int h, int wdt, int dilation);

// y[i] += a * x[i]
void axpy(float a, const float* x, float* y, std::size_t n);

// Scalar reference entry points (always available, used by equivalence tests).
namespace ref {
void sgemm(const float* a, const float* b, float* c, int m, int k, int n);
void sgemm_acc(const float* a, const float* b, float* c, int m, int k, int n);
void dwconv3x3(const float* x, const float* w, float* y,
               int h, int wdt, int dilation);
void axpy(float a, const float* x, float* y, std::size_t n);
}  // namespace ref

namespace avx2 {
void sgemm(const float* a, const float* b, float* c, int m, int k, int n);
void sgemm_acc(const float* a, const float* b, float* c, int m, int k, int n);
void dwconv3x3(const float* x, const float* w, float* y,
               int h, int wdt, int dilation);
void axpy(float a, const float* x, float* y, std::size_t n);
}  // namespace avx2

}  // namespace cldnet::kernels
