#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace cvp {

// Substream seed for the k-th item: splitmix64 finalizer over the master seed
// offset by (k+1) times the golden-ratio increment. Items get independent,
// scheduling-free streams, and any reimplementation using the same rule and
// mt19937_64 reproduces them.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t k) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (k + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// mt19937_64 with hand-rolled mappings (uniform bits -> double, Box-Muller,
// CDF scan). The standard fixes the engine's output exactly, and avoiding
// std::*_distribution keeps draws identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // [0, 1), 53-bit resolution
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double normal(double mean, double sd) {
    if (!has_spare_) {
      const double u1 = 1.0 - uniform();  // (0, 1]
      const double u2 = uniform();
      const double radius = std::sqrt(-2.0 * std::log(u1));
      const double angle = 2.0 * M_PI * u2;
      spare_ = radius * std::sin(angle);
      has_spare_ = true;
      return mean + sd * radius * std::cos(angle);
    }
    has_spare_ = false;
    return mean + sd * spare_;
  }

  double lognormal(double log_median, double log_sd) { return std::exp(normal(log_median, log_sd)); }

  bool bernoulli(double p) { return uniform() < p; }

  // Index into non-negative weights, probability proportional to weight.
  int categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0)) throw std::invalid_argument("categorical: weights sum to zero");
    double r = uniform() * total;
    for (size_t i = 0; i < weights.size(); ++i) {
      r -= weights[i];
      if (r < 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  std::uint64_t bits() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cvp
