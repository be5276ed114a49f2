#pragma once

// Prediction rewards as tangent planes to the negative belief entropy.
//
// For rho(b) = -H(b) the Fenchel conjugate is log-sum-exp, so every reward
// vector r defines the affine minorant <b, r> - lse(r). A prediction reward
// family {r_j} gives the lower bound max_j <b, r_j> - lse(r_j); for the
// correct/incorrect reward (r', r'') the gap to -H(b) has a closed form and a
// uniform upper bound whenever 1 <= r' - r'' <= n_y.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dan {

inline constexpr double kSimplexTolerance = 1e-9;

/// Probability vector over n_y >= 2 target values. Construction validates;
/// renormalization only happens through `normalized`.
class Belief {
 public:
  explicit Belief(std::vector<double> probs);

  static Belief normalized(std::vector<double> weights);
  static Belief uniform(std::size_t n);
  static Belief vertex(std::size_t n, std::size_t index);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }
  const std::vector<double>& values() const noexcept { return probs_; }

  /// Index of the largest entry, lowest index on ties.
  std::size_t argmax() const noexcept;
  double max() const noexcept { return probs_[argmax()]; }

  bool operator==(const Belief&) const = default;

 private:
  std::vector<double> probs_;
};

/// Reward r' for a correct prediction and r'' otherwise, over n_y classes.
struct PredictionRewardSpec {
  double r_correct = 1.0;
  double r_incorrect = 0.0;
  std::size_t n_y = 2;

  /// Throws ValidationError unless r' >= r'' and n_y >= 2.
  void validate() const;
  double margin() const noexcept { return r_correct - r_incorrect; }
  /// True iff 1 <= margin <= n_y, the range covered by theorem_bound.
  bool bound_applies() const noexcept;
};

struct RewardVector {
  int label = 0;
  std::vector<double> rewards;  // entry i: reward when the true class is i
};

/// Set of tangent-defining reward vectors sharing one dimension.
class RewardVectorFamily {
 public:
  explicit RewardVectorFamily(std::vector<RewardVector> vectors);

  std::size_t dimension() const noexcept { return dim_; }
  std::size_t size() const noexcept { return vectors_.size(); }
  const std::vector<RewardVector>& vectors() const noexcept { return vectors_; }
  const RewardVector& operator[](std::size_t i) const { return vectors_[i]; }

 private:
  std::vector<RewardVector> vectors_;
  std::size_t dim_ = 0;
};

/// Natural-log Shannon entropy with 0 ln 0 = 0.
double entropy(const Belief& b);

/// ln sum exp(x_i), shifted by the maximum. Throws on empty input.
double log_sum_exp(std::span<const double> x);

std::vector<double> softmax(std::span<const double> x);

/// Vector j (label j, 1-based) holds r' at position j-1 and r'' elsewhere.
RewardVectorFamily reward_vectors_01(const PredictionRewardSpec& spec);

/// Single constant vector: rewards every prediction equally.
RewardVectorFamily abstain_family(std::size_t n_y, double value, int label = 0);

/// <b, r> - lse(r): the tangent to -H touching at softmax(r).
double tangent_value(const Belief& b, std::span<const double> r);

struct TangentChoice {
  double value = 0.0;
  int label = 0;
};

/// Max over the family's tangents; ties go to the lowest label.
TangentChoice prediction_lower_bound(const Belief& b, const RewardVectorFamily& family);

/// (r' - r'') max_i b_i + r'' - ln(e^{r'} + (n_y - 1) e^{r''}).
double closed_form_01_bound(const Belief& b, const PredictionRewardSpec& spec);

/// -H(b) - closed_form_01_bound(b, spec).
double approximation_error_01(const Belief& b, const PredictionRewardSpec& spec);

/// max(eps1, eps2) - r'' + ln(e^{r'} + (n_y - 1) e^{r''}) with
/// eps1 = ln(1/m) - 1 and eps2 = ln(1/n_y) - m/n_y.
/// Throws ApplicabilityError unless 1 <= m <= n_y.
double theorem_bound(const PredictionRewardSpec& spec);

/// Max over every tangent of every family. Throws on an empty sequence.
double multi_tangent_bound(const Belief& b, std::span<const RewardVectorFamily> families);

struct GridSampler {
  double step = 0.01;
};

/// `n` uniform Dirichlet draws. The k-uniform beliefs (k entries at 1/k,
/// k = 1..n_y) are checked in addition, since the gap is extremal there.
struct RandomSampler {
  std::size_t n = 100000;
  std::uint64_t seed = 0;
};

using Sampler = std::variant<GridSampler, RandomSampler>;

/// Parses "grid:STEP" or "random:N". Throws ValidationError.
Sampler parse_sampler(std::string_view text, std::uint64_t seed);

/// Calls `fn` for every belief whose entries are multiples of 1/resolution.
template <typename Fn>
void for_each_grid_belief(std::size_t n_y, std::size_t resolution, Fn&& fn);

/// Beliefs with k entries at 1/k, for k = 1..n_y.
std::vector<Belief> k_uniform_beliefs(std::size_t n_y);

struct BoundReport {
  PredictionRewardSpec spec;
  double theorem_bound = 0.0;
  double max_error = 0.0;
  double min_error = 0.0;
  std::vector<double> argmax_belief;
  bool holds = false;
  std::size_t samples_checked = 0;
};

/// Evaluates the approximation gap on every sampled belief and checks
/// -1e-9 <= gap <= theorem_bound + 1e-9. Violations give holds = false.
BoundReport verify_bound_sweep(const PredictionRewardSpec& spec, const Sampler& sampler);

/// {n_y, r_correct, r_incorrect, theorem_bound, max_error, argmax_belief, holds, samples_checked}
std::string to_json(const BoundReport& report);

// ---------------------------------------------------------------------------

template <typename Fn>
void for_each_grid_belief(std::size_t n_y, std::size_t resolution, Fn&& fn) {
  std::vector<std::size_t> counts(n_y, 0);
  std::vector<double> probs(n_y, 0.0);
  const double inv = 1.0 / static_cast<double>(resolution);
  // Enumerate compositions of `resolution` into n_y non-negative parts.
  auto recurse = [&](auto&& self, std::size_t pos, std::size_t remaining) -> void {
    if (pos + 1 == n_y) {
      counts[pos] = remaining;
      double sum = 0.0;
      for (std::size_t i = 0; i + 1 < n_y; ++i) {
        probs[i] = static_cast<double>(counts[i]) * inv;
        sum += probs[i];
      }
      probs[pos] = remaining == 0 ? 0.0 : 1.0 - sum;
      if (probs[pos] < 0.0) probs[pos] = 0.0;
      fn(Belief::normalized(probs));
      return;
    }
    for (std::size_t c = 0; c <= remaining; ++c) {
      counts[pos] = c;
      self(self, pos + 1, remaining - c);
    }
  };
  recurse(recurse, 0, resolution);
}

}  // namespace dan
