#pragma once

// Data-parallel inner loops shared by the SDP solver and the grid pruner.
//
// Every kernel has a portable scalar reference in opf::simd::scalar and, on
// x86-64, an AVX2+FMA variant in opf::simd::avx2. The public entry points
// dispatch once per process on the detected ISA; tests force each ISA and
// compare against the scalar reference.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace opf::simd {

enum class Isa { kScalar, kAvx2 };

/// ISA used by the dispatching entry points.
Isa active_isa();

/// True when the running CPU can execute the given variant.
bool isa_available(Isa isa);

/// Override dispatch (tests and benchmarking). Returns false and leaves the
/// selection unchanged if the ISA is unavailable.
bool force_isa(Isa isa);

std::string_view isa_name(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// sum_k coef[k] * base[idx[k]]
double gather_dot(std::span<const double> coef, std::span<const std::int32_t> idx,
                  const double* base);

/// Clears alive[j] for every j where
///   weight * (coord[j] - center)^2 < budget
/// and alive[j] is set. Returns how many flags were cleared. The comparison
/// is strict, so points exactly on the boundary survive.
std::size_t clear_inside(std::span<const double> coord, double center, double weight,
                         double budget, std::span<std::uint8_t> alive);

namespace scalar {
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double gather_dot(std::span<const double> coef, std::span<const std::int32_t> idx,
                  const double* base);
std::size_t clear_inside(std::span<const double> coord, double center, double weight,
                         double budget, std::span<std::uint8_t> alive);
}  // namespace scalar

namespace avx2 {
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double gather_dot(std::span<const double> coef, std::span<const std::int32_t> idx,
                  const double* base);
std::size_t clear_inside(std::span<const double> coord, double center, double weight,
                         double budget, std::span<std::uint8_t> alive);
}  // namespace avx2

}  // namespace opf::simd
