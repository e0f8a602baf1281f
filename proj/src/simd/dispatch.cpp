#include <atomic>
#include <cassert>
#include <cstdlib>
#include <cstring>

#include "envlabel/simd/kernels.hpp"

namespace envlabel::simd {
namespace {

Level probe() {
#if defined(ENVLABEL_WITH_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2")) return Level::Avx2;
#endif
  return Level::Scalar;
}

Level initial_level() {
  const Level best = probe();
  if (const char* env = std::getenv("ENVLABEL_SIMD"); env != nullptr && std::strcmp(env, "scalar") == 0) {
    return Level::Scalar;
  }
  return best;
}

std::atomic<Level>& current() {
  static std::atomic<Level> level{initial_level()};
  return level;
}

}  // namespace

std::string_view to_string(Level level) {
  switch (level) {
    case Level::Scalar: return "scalar";
    case Level::Avx2: return "avx2";
  }
  return "unknown";
}

Level detected_level() {
  static const Level level = probe();
  return level;
}

Level active_level() { return current().load(std::memory_order_relaxed); }

Level set_level(Level level) {
  if (static_cast<int>(level) > static_cast<int>(detected_level())) level = detected_level();
  current().store(level, std::memory_order_relaxed);
  return level;
}

std::size_t count_in_ball(std::span<const double> x, std::span<const double> y,
                          std::span<const double> z, double qx, double qy, double qz,
                          double radius_sq) {
  assert(x.size() == y.size() && x.size() == z.size());
#if defined(ENVLABEL_WITH_AVX2)
  if (active_level() == Level::Avx2) {
    return avx2::count_in_ball(x.data(), y.data(), z.data(), x.size(), qx, qy, qz, radius_sq);
  }
#endif
  return scalar::count_in_ball(x.data(), y.data(), z.data(), x.size(), qx, qy, qz, radius_sq);
}

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
#if defined(ENVLABEL_WITH_AVX2)
  if (active_level() == Level::Avx2) return avx2::dot(a.data(), b.data(), a.size());
#endif
  return scalar::dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  assert(x.size() == y.size());
#if defined(ENVLABEL_WITH_AVX2)
  if (active_level() == Level::Avx2) {
    avx2::axpy(alpha, x.data(), y.data(), x.size());
    return;
  }
#endif
  scalar::axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace envlabel::simd
