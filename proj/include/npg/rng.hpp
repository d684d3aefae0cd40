#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace npg {

// Counter-based SplitMix64: draw k of stream `seed` is
// mix64(seed + (k + 1) * 0x9E3779B97F4A7C15), with the standard SplitMix64 finalizer.
// Doubles take the top 53 bits: u = (x >> 11) * 2^-53, so u is in [0, 1).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Exp(1) via inversion; 1 - u lies in (0, 1].
  double exponential();

  // Row-major fill.
  Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, double lo, double hi);
  Eigen::VectorXd uniform_vector(Eigen::Index n, double lo, double hi);
  // Flat Dirichlet via normalized exponentials.
  Eigen::VectorXd dirichlet_flat(Eigen::Index n);
  // Interior simplex point: dirichlet_flat mixed with uniform so entries stay >= floor / n.
  Eigen::VectorXd interior_simplex(Eigen::Index n, double floor = 0.05);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace npg
