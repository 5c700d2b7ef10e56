#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "treediff/kernels.hpp"

namespace treediff::kernels::avx2 {

// Operand order keeps std::max's choice on ties (signed zeros).
void max_inplace(float* a, const float* b, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 va = _mm256_loadu_ps(a + i);
    const __m256 vb = _mm256_loadu_ps(b + i);
    _mm256_storeu_ps(a + i, _mm256_max_ps(vb, va));
  }
  for (; i < n; ++i) a[i] = std::max(a[i], b[i]);
}

void subtract_inplace(float* a, const float* b, std::size_t n) {
  const __m256 one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 va = _mm256_loadu_ps(a + i);
    const __m256 vb = _mm256_loadu_ps(b + i);
    _mm256_storeu_ps(a + i, _mm256_mul_ps(va, _mm256_sub_ps(one, vb)));
  }
  for (; i < n; ++i) a[i] = a[i] * (1.0f - b[i]);
}

IouCounts iou_counts(const float* a, const float* b, std::size_t n) {
  const __m256 half = _mm256_set1_ps(0.5f);
  IouCounts c;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 ma = _mm256_cmp_ps(_mm256_loadu_ps(a + i), half, _CMP_GE_OQ);
    const __m256 mb = _mm256_cmp_ps(_mm256_loadu_ps(b + i), half, _CMP_GE_OQ);
    c.intersection += static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_ps(_mm256_and_ps(ma, mb))));
    c.union_ += static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_ps(_mm256_or_ps(ma, mb))));
  }
  for (; i < n; ++i) {
    const bool x = a[i] >= 0.5f;
    const bool y = b[i] >= 0.5f;
    c.intersection += static_cast<std::size_t>(x && y);
    c.union_ += static_cast<std::size_t>(x || y);
  }
  return c;
}

void exceeds_mask(const float* a, const float* b, std::size_t n, float tol, std::uint8_t* out) {
  const __m256 sign = _mm256_set1_ps(-0.0f);
  const __m256 vt = _mm256_set1_ps(tol);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 d = _mm256_andnot_ps(sign, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
    const int bits = _mm256_movemask_ps(_mm256_cmp_ps(d, vt, _CMP_GT_OQ));
    for (int k = 0; k < 8; ++k) out[i + static_cast<std::size_t>(k)] = static_cast<std::uint8_t>((bits >> k) & 1);
  }
  for (; i < n; ++i) out[i] = static_cast<std::uint8_t>(std::fabs(a[i] - b[i]) > tol);
}

}  // namespace treediff::kernels::avx2
