#include <atomic>
#include <cstdlib>
#include <string_view>

#include "opf/kernels.hpp"

namespace opf::simd {

#if !defined(OPF_HAVE_AVX2_KERNELS)
// Non-x86 builds: the AVX2 namespace forwards to the reference so the symbols
// exist; isa_available() keeps dispatch from ever selecting it.
namespace avx2 {
double dot(std::span<const double> a, std::span<const double> b) { return scalar::dot(a, b); }
void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  scalar::axpy(alpha, x, y);
}
double gather_dot(std::span<const double> coef, std::span<const std::int32_t> idx,
                  const double* base) {
  return scalar::gather_dot(coef, idx, base);
}
std::size_t clear_inside(std::span<const double> coord, double center, double weight,
                         double budget, std::span<std::uint8_t> alive) {
  return scalar::clear_inside(coord, center, weight, budget, alive);
}
}  // namespace avx2
#endif

namespace {

Isa detect() {
  if (const char* f = std::getenv("OPF_FORCE_SCALAR"); f && std::string_view(f) == "1") return Isa::kScalar;
#if defined(OPF_HAVE_AVX2_KERNELS)
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Isa::kAvx2;
#endif
  return Isa::kScalar;
}

std::atomic<Isa>& selected() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

Isa active_isa() { return selected().load(std::memory_order_relaxed); }

bool isa_available(Isa isa) {
  if (isa == Isa::kScalar) return true;
#if defined(OPF_HAVE_AVX2_KERNELS)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool force_isa(Isa isa) {
  if (!isa_available(isa)) return false;
  selected().store(isa, std::memory_order_relaxed);
  return true;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
  }
  return "unknown";
}

double dot(std::span<const double> a, std::span<const double> b) {
  return active_isa() == Isa::kAvx2 ? avx2::dot(a, b) : scalar::dot(a, b);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (active_isa() == Isa::kAvx2)
    avx2::axpy(alpha, x, y);
  else
    scalar::axpy(alpha, x, y);
}

double gather_dot(std::span<const double> coef, std::span<const std::int32_t> idx,
                  const double* base) {
  return active_isa() == Isa::kAvx2 ? avx2::gather_dot(coef, idx, base)
                                    : scalar::gather_dot(coef, idx, base);
}

std::size_t clear_inside(std::span<const double> coord, double center, double weight,
                         double budget, std::span<std::uint8_t> alive) {
  return active_isa() == Isa::kAvx2 ? avx2::clear_inside(coord, center, weight, budget, alive)
                                    : scalar::clear_inside(coord, center, weight, budget, alive);
}

}  // namespace opf::simd
