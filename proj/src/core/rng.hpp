#pragma once

#include <cstdint>
#include <vector>

namespace cdt {

class Matrix;

// Counter-based deterministic generator. Each output is a pure hash of
// (seed, counter), so a given seed yields the same sequence on every
// platform and derived streams are independent of draw order elsewhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64();

  // Independent stream; deriving does not consume state from this generator.
  Rng derive(std::uint64_t stream) const;

  double uniform01();  // [0, 1), 53-bit resolution
  double uniform(double lo, double hi);
  double gaussian();  // standard normal (Marsaglia polar)
  std::uint64_t below(std::uint64_t n);  // uniform in [0, n)

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  void fill_gaussian(Matrix& m, double stddev);
  void fill_gaussian(double* out, std::size_t n, double stddev);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cdt
