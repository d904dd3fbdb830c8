#include "core/rng.hpp"

#include <cmath>

#include "core/error.hpp"
#include "core/matrix.hpp"

namespace cdt {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

}  // namespace

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix64(seed_ + counter_ * kGamma);
}

Rng Rng::derive(std::uint64_t stream) const {
  // Two mixing rounds keep sibling streams decorrelated from each other and
  // from the parent sequence.
  return Rng(mix64(mix64(seed_ ^ 0xD1B54A32D192ED03ull) + stream * kGamma));
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) fail(ErrorCode::invalid_argument, "Rng::below: n must be > 0");
  // Rejection sampling over the largest multiple of n keeps this unbiased.
  const std::uint64_t limit = n * ((~0ull) / n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

void Rng::fill_gaussian(Matrix& m, double stddev) {
  fill_gaussian(m.data(), m.size(), stddev);
}

void Rng::fill_gaussian(double* out, std::size_t n, double stddev) {
  for (std::size_t i = 0; i < n; ++i) out[i] = gaussian() * stddev;
}

}  // namespace cdt
