#include <immintrin.h>

#include "envlabel/simd/kernels.hpp"

namespace envlabel::simd::avx2 {

std::size_t count_in_ball(const double* x, const double* y, const double* z, std::size_t n,
                          double qx, double qy, double qz, double radius_sq) {
  const __m256d vqx = _mm256_set1_pd(qx);
  const __m256d vqy = _mm256_set1_pd(qy);
  const __m256d vqz = _mm256_set1_pd(qz);
  const __m256d vr2 = _mm256_set1_pd(radius_sq);
  std::size_t count = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(x + i), vqx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(y + i), vqy);
    const __m256d dz = _mm256_sub_pd(_mm256_loadu_pd(z + i), vqz);
    const __m256d xy = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
    const __m256d d2 = _mm256_add_pd(xy, _mm256_mul_pd(dz, dz));
    const int mask = _mm256_movemask_pd(_mm256_cmp_pd(d2, vr2, _CMP_LE_OQ));
    count += static_cast<std::size_t>(__builtin_popcount(static_cast<unsigned>(mask)));
  }
  if (i < n) count += scalar::count_in_ball(x + i, y + i, z + i, n - i, qx, qy, qz, radius_sq);
  return count;
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  alignas(32) double s[4];
  _mm256_store_pd(s, acc);
  double total = (s[0] + s[1]) + (s[2] + s[3]);
  for (; i < n; ++i) {
    const double p = a[i] * b[i];
    total = total + p;
  }
  return total;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), p));
  }
  if (i < n) scalar::axpy(alpha, x + i, y + i, n - i);
}

}  // namespace envlabel::simd::avx2
