#include <algorithm>
#include <cmath>

#include "treediff/kernels.hpp"

namespace treediff::kernels::scalar {

void max_inplace(float* a, const float* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) a[i] = std::max(a[i], b[i]);
}

void subtract_inplace(float* a, const float* b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) a[i] = a[i] * (1.0f - b[i]);
}

IouCounts iou_counts(const float* a, const float* b, std::size_t n) {
  IouCounts c;
  for (std::size_t i = 0; i < n; ++i) {
    const bool x = a[i] >= 0.5f;
    const bool y = b[i] >= 0.5f;
    c.intersection += static_cast<std::size_t>(x && y);
    c.union_ += static_cast<std::size_t>(x || y);
  }
  return c;
}

void exceeds_mask(const float* a, const float* b, std::size_t n, float tol, std::uint8_t* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::uint8_t>(std::fabs(a[i] - b[i]) > tol);
}

}  // namespace treediff::kernels::scalar
