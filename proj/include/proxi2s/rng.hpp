#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace proxi2s {

// splitmix64 step; used both as a mixer and to expand seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a master seed and a path of
// indices, e.g. (master, N, rep). Feeding each part through splitmix64
// decorrelates nearby indices, so parallel replications can draw from
// disjoint streams while staying reproducible.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = master;
  (void)splitmix64(h);
  for (std::uint64_t part : path) {
    h ^= part + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
    (void)splitmix64(h);
  }
  std::uint64_t s = h;
  return splitmix64(s);
}

// Seedable generator with explicitly coded distributions. std::mt19937_64 is
// fully specified by the standard; the distribution transforms below avoid
// the implementation-defined std::*_distribution classes, so identical seeds
// give identical streams across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on (0,1); never returns an endpoint.
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, cosine branch only.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  double logistic(double mu, double s) {
    double u = uniform();
    return mu + s * std::log(u / (1.0 - u));
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  // Knuth multiplication method; means in this artifact are small.
  int poisson(double mean) {
    double limit = std::exp(-mean);
    double prod = uniform();
    int k = 0;
    while (prod > limit) {
      prod *= uniform();
      ++k;
    }
    return k;
  }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  // Draws an index with probability proportional to weights[i].
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace proxi2s
