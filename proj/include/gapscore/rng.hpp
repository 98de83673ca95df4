#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace gapscore {

// Seeded, splittable random source.
//
// The stream is std::mt19937_64 seeded with a 64-bit value. Child streams are
// derived with fork(): the child seed is a SplitMix64 hash of the parent seed
// and the label tuple, so it does not depend on how many values the parent
// has already produced. Parallel sections fork one child per unit of work.
class SeededRng {
 public:
  using result_type = std::uint64_t;

  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  SeededRng fork(std::span<const std::uint64_t> label) const;
  SeededRng fork(std::initializer_list<std::uint64_t> label) const {
    return fork(std::span<const std::uint64_t>(label.begin(), label.size()));
  }

  // UniformRandomBitGenerator
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  // Uniform on [lo, hi).
  double uniform(double lo = 0.0, double hi = 1.0);
  // Uniform on the open interval (lo, hi); requires lo < hi.
  double uniform_open(double lo, double hi);
  double normal(double mean = 0.0, double sd = 1.0);
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  // k distinct values from [0, n), uniformly, via partial Fisher-Yates.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace gapscore
