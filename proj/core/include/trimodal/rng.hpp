#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace trimodal {

// xoshiro256** seeded through splitmix64. Fixed algorithm so every
// platform reproduces the same mask and initialization streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  std::uint64_t below(std::uint64_t n);  // uniform in [0, n)

  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);
  double normal(double mean, double stddev);

  std::uint64_t seed() const { return seed_; }

  // Independent child stream, deterministic in (seed, stream).
  Rng derive(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> s_{};
  std::uint64_t seed_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace trimodal
