#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace tpolab {

/// Deterministic RNG with hand-rolled draws so streams are reproducible
/// byte-for-byte across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  int bernoulli(double p) { return uniform() < p ? 1 : 0; }

  /// Inverse-CDF draw from a probability vector.
  int categorical(const Eigen::Ref<const Eigen::VectorXd>& probs) {
    double u = uniform();
    double acc = 0.0;
    const Eigen::Index n = probs.size();
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += probs(i);
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(n - 1);
  }

  /// Exponential(1) via inverse CDF.
  double exponential() { return -std::log(1.0 - uniform()); }

 private:
  std::mt19937_64 gen_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_string(std::string_view s);

/// Seed-splitting rule: run seed = mix(master, tag, index). Documented so
/// independent streams can be reconstructed from the experiment config.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                          std::uint64_t index);

}  // namespace tpolab
