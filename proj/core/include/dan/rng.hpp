#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dan {

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Seed of the named sub-stream of `seed`. The derivation is
/// `mix64(seed ^ mix64(fnv1a(name) + index))`, so every component that draws
/// randomness can be reproduced in isolation from the root seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) noexcept;

/// Seeded generator with portable draw helpers. The std distributions are
/// implementation-defined, so draws are built directly from the engine output
/// to keep results identical across standard libraries.
class Rng {
 public:
  using Engine = std::mt19937_64;

  explicit Rng(std::uint64_t seed = 0) : engine_(mix64(seed)) {}

  Rng stream(std::string_view name, std::uint64_t index = 0) const;

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n).
  std::size_t uniform_int(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  /// Index drawn with probability proportional to `weights`.
  std::size_t categorical(std::span<const double> weights);
  /// Uniform draw from the probability simplex (Dirichlet(1, ..., 1)).
  std::vector<double> dirichlet_uniform(std::size_t n);
  /// Standard normal (Box-Muller, one value per call).
  double normal();

  std::string state() const;
  void set_state(const std::string& s);

  Engine& engine() { return engine_; }

 private:
  Engine engine_;
};

}  // namespace dan
