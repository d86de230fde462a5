#include <immintrin.h>

#include "opf/kernels.hpp"

namespace opf::simd::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const double* pa = a.data();
  const double* pb = b.data();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(pa + i), _mm256_loadu_pd(pb + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(pa + i + 4), _mm256_loadu_pd(pb + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(pa + i), _mm256_loadu_pd(pb + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += pa[i] * pb[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  const double* px = x.data();
  double* py = y.data();
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(py + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(px + i), vy);
    _mm256_storeu_pd(py + i, vy);
  }
  for (; i < n; ++i) py[i] += alpha * px[i];
}

double gather_dot(std::span<const double> coef, std::span<const std::int32_t> idx,
                  const double* base) {
  const std::size_t n = coef.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m128i vi = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx.data() + k));
    const __m256d g = _mm256_i32gather_pd(base, vi, 8);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(coef.data() + k), g, acc);
  }
  double s = hsum(acc);
  for (; k < n; ++k) s += coef[k] * base[idx[k]];
  return s;
}

std::size_t clear_inside(std::span<const double> coord, double center, double weight,
                         double budget, std::span<std::uint8_t> alive) {
  const std::size_t n = coord.size();
  const __m256d vc = _mm256_set1_pd(center);
  const __m256d vw = _mm256_set1_pd(weight);
  const __m256d vb = _mm256_set1_pd(budget);
  std::size_t cleared = 0;
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(coord.data() + j), vc);
    // (w*d)*d without contraction so the predicate matches the scalar path bit for bit.
    const __m256d q = _mm256_mul_pd(_mm256_mul_pd(vw, d), d);
    const int mask = _mm256_movemask_pd(_mm256_cmp_pd(q, vb, _CMP_LT_OQ));
    if (mask == 0) continue;
    for (int l = 0; l < 4; ++l) {
      if ((mask >> l) & 1) {
        std::uint8_t& a = alive[j + static_cast<std::size_t>(l)];
        cleared += a;
        a = 0;
      }
    }
  }
  for (; j < n; ++j) {
    const double d = coord[j] - center;
    if (alive[j] && weight * d * d < budget) {
      alive[j] = 0;
      ++cleared;
    }
  }
  return cleared;
}

}  // namespace opf::simd::avx2
