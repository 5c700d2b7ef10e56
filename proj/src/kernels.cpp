#include <atomic>
#include <cstdlib>
#include <string_view>

#include "treediff/kernels.hpp"

namespace treediff::kernels {

namespace {

Isa detect() {
  if (const char* env = std::getenv("TREEDIFF_SIMD"); env != nullptr && std::string_view(env) == "scalar") {
    return Isa::kScalar;
  }
  return isa_supported(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool isa_supported(Isa isa) {
  if (isa == Isa::kScalar) return true;
#ifdef TREEDIFF_HAVE_AVX2_KERNELS
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) { current().store(isa_supported(isa) ? isa : Isa::kScalar, std::memory_order_relaxed); }

const char* isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

#ifdef TREEDIFF_HAVE_AVX2_KERNELS
#define TREEDIFF_DISPATCH(fn, ...) \
  return active_isa() == Isa::kAvx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__)
#else
#define TREEDIFF_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

void max_inplace(float* a, const float* b, std::size_t n) { TREEDIFF_DISPATCH(max_inplace, a, b, n); }
void subtract_inplace(float* a, const float* b, std::size_t n) { TREEDIFF_DISPATCH(subtract_inplace, a, b, n); }
IouCounts iou_counts(const float* a, const float* b, std::size_t n) { TREEDIFF_DISPATCH(iou_counts, a, b, n); }
void exceeds_mask(const float* a, const float* b, std::size_t n, float tol, std::uint8_t* out) {
  TREEDIFF_DISPATCH(exceeds_mask, a, b, n, tol, out);
}

}  // namespace treediff::kernels
