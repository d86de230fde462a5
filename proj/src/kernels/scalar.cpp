#include "opf/kernels.hpp"

namespace opf::simd::scalar {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double gather_dot(std::span<const double> coef, std::span<const std::int32_t> idx,
                  const double* base) {
  double s = 0.0;
  for (std::size_t k = 0; k < coef.size(); ++k) s += coef[k] * base[idx[k]];
  return s;
}

std::size_t clear_inside(std::span<const double> coord, double center, double weight,
                         double budget, std::span<std::uint8_t> alive) {
  std::size_t cleared = 0;
  for (std::size_t j = 0; j < coord.size(); ++j) {
    const double d = coord[j] - center;
    if (alive[j] && weight * d * d < budget) {
      alive[j] = 0;
      ++cleared;
    }
  }
  return cleared;
}

}  // namespace opf::simd::scalar
