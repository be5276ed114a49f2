#pragma once

// Exact discrete Bayes filtering over a target variable, expected information
// gain, expected prediction value, greedy one-step action oracles and a
// bootstrap particle filter.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "dan/convex_bounds.hpp"
#include "dan/rng.hpp"

namespace dan {

/// transition(y', y) = Pr(y' | y); observations[a](z, y) = Pr(z | y, a).
/// Columns of every matrix are probability distributions.
struct DiscreteModel {
  Eigen::MatrixXd transition;
  std::vector<Eigen::MatrixXd> observations;

  std::size_t n_targets() const { return static_cast<std::size_t>(transition.cols()); }
  std::size_t n_actions() const { return observations.size(); }
  std::size_t n_obs() const { return observations.empty() ? 0 : static_cast<std::size_t>(observations[0].rows()); }

  /// Shapes agree and every column sums to 1 within 1e-9. Throws ValidationError.
  void validate() const;

  /// {n_targets, n_actions, n_obs, transition: row-major, observations: [row-major]}
  std::string to_json() const;
  static DiscreteModel from_json(const std::string& text);
};

using ActionObservation = std::pair<std::size_t, std::size_t>;

Eigen::VectorXd as_vector(const Belief& b);

/// T b: the belief after the transition, before the observation arrives.
Belief predict(const Belief& b, const DiscreteModel& model);

/// Pr(z | b, a) for every z, where b is the already-predicted belief.
std::vector<double> observation_distribution(const Belief& predicted, std::size_t action,
                                             const DiscreteModel& model);

/// Transition then correction: b'(y) ∝ O_a(z, y) (T b)(y).
/// Throws ImpossibleObservationError if the observation has zero likelihood.
Belief bayes_update(const Belief& b, std::size_t action, std::size_t obs, const DiscreteModel& model);

/// H(T b) - sum_z Pr(z | b, a) H(posterior_z).
double expected_info_gain(const Belief& b, std::size_t action, const DiscreteModel& model);

/// sum_z Pr(z | b, a) max_j <posterior_z, r_j>, without the conjugate constant.
double expected_prediction_value(const Belief& b, std::size_t action, const DiscreteModel& model,
                                 const RewardVectorFamily& family);

/// E_z[-H(posterior_z)] - E_z[rho'(posterior_z)] with rho' the 0-1 closed form
/// including its conjugate constant. Lies in [0, theorem_bound(spec)].
double expected_bound_gap(const Belief& b, std::size_t action, const DiscreteModel& model,
                          const PredictionRewardSpec& spec);

struct InfoGainCriterion {};
struct PredictionCriterion {
  RewardVectorFamily family;
};
using ActionCriterion = std::variant<InfoGainCriterion, PredictionCriterion>;

/// Argmax over actions of the criterion; ties go to the lowest action.
std::size_t greedy_action(const Belief& b, const DiscreteModel& model, const ActionCriterion& criterion);

/// Posterior by summing over every hidden trajectory. Test oracle.
/// Guard: history <= 8 steps, n_targets <= 64, at most 2^26 paths.
Belief brute_force_posterior(std::span<const ActionObservation> history, const Belief& prior,
                             const DiscreteModel& model);

struct ParticleSet {
  std::vector<std::size_t> particles;
  std::vector<double> weights;

  /// `count` particles drawn from `b` with uniform weights.
  static ParticleSet sample(const Belief& b, std::size_t count, Rng& rng);
  /// Weighted histogram over `n_targets` values.
  Belief to_belief(std::size_t n_targets) const;
};

enum class Resampling { kSystematic, kMultinomial };

/// Bootstrap step: propagate through T, weight by O_a(z, .), resample.
/// Throws DegeneracyError if every weight vanishes.
ParticleSet particle_filter_step(const ParticleSet& p, std::size_t action, std::size_t obs,
                                 const DiscreteModel& model, Rng& rng,
                                 Resampling scheme = Resampling::kSystematic);

/// Half the L1 distance.
double tv_distance(const Belief& a, const Belief& b);

}  // namespace dan
