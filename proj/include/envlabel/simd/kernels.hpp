#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Data-parallel inner loops shared by the clutter filter and the toy trainer.
//
// Every kernel has a scalar reference and, where the target supports it, an
// AVX2 variant. Variants are required to produce bit-identical results: the
// scalar reference accumulates in the same four-lane order the vector code
// uses, and the build disables floating-point contraction.
namespace envlabel::simd {

enum class Level { Scalar, Avx2 };

std::string_view to_string(Level level);

/// Highest level this CPU and build support.
Level detected_level();

/// Level used by the dispatching entry points below. Starts at
/// detected_level(), unless ENVLABEL_SIMD=scalar is set in the environment.
Level active_level();

/// Requests a level; requests above detected_level() are clamped. Returns the
/// level actually in effect.
Level set_level(Level level);

/// Number of i with (x[i]-qx)^2 + (y[i]-qy)^2 + (z[i]-qz)^2 <= radius_sq.
/// The three spans must have equal length.
std::size_t count_in_ball(std::span<const double> x, std::span<const double> y,
                          std::span<const double> z, double qx, double qy, double qz,
                          double radius_sq);

/// Sum of a[i]*b[i].
double dot(std::span<const double> a, std::span<const double> b);

/// y[i] += alpha * x[i].
void axpy(double alpha, std::span<const double> x, std::span<double> y);

namespace scalar {
std::size_t count_in_ball(const double* x, const double* y, const double* z, std::size_t n,
                          double qx, double qy, double qz, double radius_sq);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

#if defined(ENVLABEL_WITH_AVX2)
namespace avx2 {
std::size_t count_in_ball(const double* x, const double* y, const double* z, std::size_t n,
                          double qx, double qy, double qz, double radius_sq);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace avx2
#endif

}  // namespace envlabel::simd
