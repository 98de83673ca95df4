#include "gapscore/rng.hpp"

#include <numeric>
#include <utility>

#include "gapscore/errors.hpp"

namespace gapscore {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

SeededRng SeededRng::fork(std::span<const std::uint64_t> label) const {
  std::uint64_t h = splitmix64(seed_ ^ 0x6A09E667F3BCC909ULL);
  // Length is mixed in so that (1) and (1, 0) differ.
  h = splitmix64(h ^ static_cast<std::uint64_t>(label.size()));
  for (std::uint64_t part : label) h = splitmix64(h ^ splitmix64(part));
  return SeededRng(h);
}

double SeededRng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double SeededRng::uniform_open(double lo, double hi) {
  if (!(lo < hi)) throw DomainError("uniform_open needs lo < hi");
  for (;;) {
    double v = uniform(lo, hi);
    if (v > lo && v < hi) return v;
  }
}

double SeededRng::normal(double mean, double sd) {
  return mean + sd * normal_(engine_);
}

std::size_t SeededRng::index(std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

std::vector<std::size_t> SeededRng::sample_without_replacement(std::size_t n,
                                                               std::size_t k) {
  if (k > n) throw DomainError("cannot sample more items than available");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + index(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace gapscore
