#pragma once

// Deterministic random draws on top of std::mt19937_64.
//
// The standard distribution adaptors (uniform_real_distribution & co.) are
// implementation-defined, so two standard libraries may turn the same engine
// stream into different variates.  Every draw here is mapped by hand from raw
// engine output, which makes runs byte-reproducible across toolchains —
// a hard requirement for the seeded CSV artifacts.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace mcot {

class Prng {
 public:
  explicit Prng(std::uint64_t seed) : engine_(seed) {}

  // Uniform double in [0,1): top 53 bits of the engine output.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in {0, ..., n-1} by rejection (unbiased).
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Prng::below: n must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return v % n;
  }

  int index(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mcot
