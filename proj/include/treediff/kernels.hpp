#pragma once

#include <cstddef>
#include <cstdint>

// Pixel kernels with a scalar reference and an AVX2 variant chosen at run
// time. Both variants produce bit-identical results.
namespace treediff::kernels {

enum class Isa { kScalar, kAvx2 };

/// Variant in use. Defaults to the best supported one; the environment
/// variable TREEDIFF_SIMD=scalar forces the reference path.
Isa active_isa();
/// Overrides the variant; requests for unsupported ISAs fall back to scalar.
void set_isa(Isa isa);
bool isa_supported(Isa isa);
const char* isa_name(Isa isa);

struct IouCounts {
  std::size_t intersection = 0;
  std::size_t union_ = 0;
};

/// a[i] = max(a[i], b[i])
void max_inplace(float* a, const float* b, std::size_t n);
/// a[i] = a[i] * (1 - b[i])
void subtract_inplace(float* a, const float* b, std::size_t n);
/// Counts over a[i] >= 0.5 and b[i] >= 0.5.
IouCounts iou_counts(const float* a, const float* b, std::size_t n);
/// out[i] = |a[i] - b[i]| > tol
void exceeds_mask(const float* a, const float* b, std::size_t n, float tol, std::uint8_t* out);

namespace scalar {
void max_inplace(float* a, const float* b, std::size_t n);
void subtract_inplace(float* a, const float* b, std::size_t n);
IouCounts iou_counts(const float* a, const float* b, std::size_t n);
void exceeds_mask(const float* a, const float* b, std::size_t n, float tol, std::uint8_t* out);
}  // namespace scalar

#if defined(__x86_64__) || defined(__i386__)
#define TREEDIFF_HAVE_AVX2_KERNELS 1
namespace avx2 {
void max_inplace(float* a, const float* b, std::size_t n);
void subtract_inplace(float* a, const float* b, std::size_t n);
IouCounts iou_counts(const float* a, const float* b, std::size_t n);
void exceeds_mask(const float* a, const float* b, std::size_t n, float tol, std::uint8_t* out);
}  // namespace avx2
#endif

}  // namespace treediff::kernels
