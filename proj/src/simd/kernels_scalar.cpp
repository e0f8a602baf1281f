#include "envlabel/simd/kernels.hpp"

namespace envlabel::simd::scalar {

std::size_t count_in_ball(const double* x, const double* y, const double* z, std::size_t n,
                          double qx, double qy, double qz, double radius_sq) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - qx;
    const double dy = y[i] - qy;
    const double dz = z[i] - qz;
    const double d2 = (dx * dx + dy * dy) + dz * dz;
    count += d2 <= radius_sq ? 1 : 0;
  }
  return count;
}

// Four interleaved partial sums, reduced as (s0+s1)+(s2+s3), then the tail.
// This is the summation order of the AVX2 kernel.
double dot(const double* a, const double* b, std::size_t n) {
  double s[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t l = 0; l < 4; ++l) {
      const double p = a[i + l] * b[i + l];
      s[l] = s[l] + p;
    }
  }
  double total = (s[0] + s[1]) + (s[2] + s[3]);
  for (; i < n; ++i) {
    const double p = a[i] * b[i];
    total = total + p;
  }
  return total;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double p = alpha * x[i];
    y[i] = y[i] + p;
  }
}

}  // namespace envlabel::simd::scalar
