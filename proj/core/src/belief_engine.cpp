#include "dan/belief_engine.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "dan/errors.hpp"

namespace dan {

namespace {

void check_columns(const Eigen::MatrixXd& m, const std::string& what) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if ((m.col(c).array() < 0.0).any()) throw ValidationError(what + " has a negative entry");
    const double s = m.col(c).sum();
    if (std::abs(s - 1.0) > 1e-9)
      throw ValidationError(what + " column " + std::to_string(c) + " sums to " + std::to_string(s));
  }
}

Belief from_vector(const Eigen::VectorXd& v) {
  return Belief::normalized(std::vector<double>(v.data(), v.data() + v.size()));
}

void check_action(std::size_t action, const DiscreteModel& model) {
  if (action >= model.n_actions()) throw ValidationError("action index out of range");
}

}  // namespace

void DiscreteModel::validate() const {
  if (transition.rows() != transition.cols() || transition.rows() < 2)
    throw ValidationError("transition must be square with at least 2 targets");
  if (observations.empty()) throw ValidationError("model needs at least one action");
  check_columns(transition, "transition");
  for (std::size_t a = 0; a < observations.size(); ++a) {
    if (observations[a].cols() != transition.cols() || observations[a].rows() != observations[0].rows())
      throw ValidationError("observation matrix " + std::to_string(a) + " has the wrong shape");
    check_columns(observations[a], "observation matrix " + std::to_string(a));
  }
}

namespace {
nlohmann::json row_major(const Eigen::MatrixXd& m) {
  auto arr = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) arr.push_back(m(r, c));
  return arr;
}

Eigen::MatrixXd from_row_major(const nlohmann::json& arr, std::size_t rows, std::size_t cols) {
  if (!arr.is_array() || arr.size() != rows * cols) throw ValidationError("matrix payload has the wrong size");
  Eigen::MatrixXd m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = arr[r * cols + c].get<double>();
  return m;
}
}  // namespace

std::string DiscreteModel::to_json() const {
  nlohmann::ordered_json j;
  j["n_targets"] = n_targets();
  j["n_actions"] = n_actions();
  j["n_obs"] = n_obs();
  j["transition"] = row_major(transition);
  auto obs = nlohmann::json::array();
  for (const auto& o : observations) obs.push_back(row_major(o));
  j["observations"] = obs;
  return j.dump();
}

DiscreteModel DiscreteModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    const auto n = j.at("n_targets").get<std::size_t>();
    const auto na = j.at("n_actions").get<std::size_t>();
    const auto nz = j.at("n_obs").get<std::size_t>();
    DiscreteModel m;
    m.transition = from_row_major(j.at("transition"), n, n);
    const auto& obs = j.at("observations");
    if (!obs.is_array() || obs.size() != na) throw ValidationError("observations count != n_actions");
    for (const auto& o : obs) m.observations.push_back(from_row_major(o, nz, n));
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model JSON: ") + e.what());
  }
}

Eigen::VectorXd as_vector(const Belief& b) {
  return Eigen::Map<const Eigen::VectorXd>(b.probs().data(), static_cast<Eigen::Index>(b.size()));
}

Belief predict(const Belief& b, const DiscreteModel& model) {
  if (b.size() != model.n_targets()) throw ValidationError("belief size does not match model");
  return from_vector(model.transition * as_vector(b));
}

std::vector<double> observation_distribution(const Belief& predicted, std::size_t action,
                                             const DiscreteModel& model) {
  check_action(action, model);
  const Eigen::VectorXd pz = model.observations[action] * as_vector(predicted);
  return {pz.data(), pz.data() + pz.size()};
}

namespace {
// Posterior given an already-predicted belief; nullopt-like via zero likelihood.
bool correct(const Eigen::VectorXd& predicted, const Eigen::MatrixXd& obs_matrix, std::size_t z,
             Eigen::VectorXd& out, double& likelihood) {
  out = obs_matrix.row(static_cast<Eigen::Index>(z)).transpose().cwiseProduct(predicted);
  likelihood = out.sum();
  if (!(likelihood > 0.0)) return false;
  out /= likelihood;
  return true;
}
}  // namespace

Belief bayes_update(const Belief& b, std::size_t action, std::size_t obs, const DiscreteModel& model) {
  check_action(action, model);
  if (b.size() != model.n_targets()) throw ValidationError("belief size does not match model");
  if (obs >= model.n_obs()) throw ValidationError("observation index out of range");
  const Eigen::VectorXd predicted = model.transition * as_vector(b);
  Eigen::VectorXd post;
  double likelihood = 0.0;
  if (!correct(predicted, model.observations[action], obs, post, likelihood))
    throw ImpossibleObservationError("observation " + std::to_string(obs) + " has zero likelihood under action " +
                                     std::to_string(action));
  return from_vector(post);
}

namespace {
template <typename Fn>
void for_each_outcome(const Belief& b, std::size_t action, const DiscreteModel& model, Fn&& fn) {
  check_action(action, model);
  if (b.size() != model.n_targets()) throw ValidationError("belief size does not match model");
  const Eigen::VectorXd predicted = model.transition * as_vector(b);
  const auto& o = model.observations[action];
  Eigen::VectorXd post;
  for (Eigen::Index z = 0; z < o.rows(); ++z) {
    double pz = 0.0;
    if (!correct(predicted, o, static_cast<std::size_t>(z), post, pz)) continue;
    fn(pz, from_vector(post));
  }
}
}  // namespace

double expected_info_gain(const Belief& b, std::size_t action, const DiscreteModel& model) {
  double expected_posterior_entropy = 0.0;
  for_each_outcome(b, action, model,
                   [&](double pz, const Belief& post) { expected_posterior_entropy += pz * entropy(post); });
  return entropy(predict(b, model)) - expected_posterior_entropy;
}

double expected_prediction_value(const Belief& b, std::size_t action, const DiscreteModel& model,
                                 const RewardVectorFamily& family) {
  if (family.dimension() != b.size()) throw ValidationError("family dimension does not match belief");
  double value = 0.0;
  for_each_outcome(b, action, model, [&](double pz, const Belief& post) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& v : family.vectors()) {
      double dot = 0.0;
      for (std::size_t i = 0; i < v.rewards.size(); ++i) dot += post[i] * v.rewards[i];
      best = std::max(best, dot);
    }
    value += pz * best;
  });
  return value;
}

double expected_bound_gap(const Belief& b, std::size_t action, const DiscreteModel& model,
                          const PredictionRewardSpec& spec) {
  double gap = 0.0;
  for_each_outcome(b, action, model,
                   [&](double pz, const Belief& post) { gap += pz * approximation_error_01(post, spec); });
  return gap;
}

std::size_t greedy_action(const Belief& b, const DiscreteModel& model, const ActionCriterion& criterion) {
  if (model.n_actions() == 0) throw ValidationError("model has no actions");
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < model.n_actions(); ++a) {
    const double v = std::visit(
        [&](const auto& c) -> double {
          using C = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<C, InfoGainCriterion>)
            return expected_info_gain(b, a, model);
          else
            return expected_prediction_value(b, a, model, c.family);
        },
        criterion);
    if (v > best_value) {
      best_value = v;
      best = a;
    }
  }
  return best;
}

Belief brute_force_posterior(std::span<const ActionObservation> history, const Belief& prior,
                             const DiscreteModel& model) {
  const std::size_t n = model.n_targets();
  if (prior.size() != n) throw ValidationError("prior size does not match model");
  if (history.size() > 8 || n > 64) throw SizeError("brute-force enumeration limited to 8 steps and 64 targets");
  double paths = 1.0;
  for (std::size_t i = 0; i <= history.size(); ++i) paths *= static_cast<double>(n);
  if (paths > static_cast<double>(1u << 26)) throw SizeError("too many hidden trajectories to enumerate");
  for (const auto& [a, z] : history) {
    check_action(a, model);
    if (z >= model.n_obs()) throw ValidationError("observation index out of range");
  }
  if (history.empty()) return prior;

  const std::size_t t_len = history.size();
  std::vector<std::size_t> path(t_len + 1, 0);
  std::vector<double> marginal(n, 0.0);
  const auto total = static_cast<std::size_t>(paths);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (auto& y : path) {
      y = c % n;
      c /= n;
    }
    double w = prior[path[0]];
    for (std::size_t k = 0; k < t_len && w > 0.0; ++k) {
      const auto [a, z] = history[k];
      w *= model.transition(static_cast<Eigen::Index>(path[k + 1]), static_cast<Eigen::Index>(path[k]));
      w *= model.observations[a](static_cast<Eigen::Index>(z), static_cast<Eigen::Index>(path[k + 1]));
    }
    marginal[path[t_len]] += w;
  }
  double s = 0.0;
  for (double v : marginal) s += v;
  if (!(s > 0.0)) throw ImpossibleObservationError("history has zero likelihood");
  return Belief::normalized(std::move(marginal));
}

ParticleSet ParticleSet::sample(const Belief& b, std::size_t count, Rng& rng) {
  if (count == 0) throw ValidationError("particle count must be at least 1");
  ParticleSet p;
  p.particles.reserve(count);
  for (std::size_t i = 0; i < count; ++i) p.particles.push_back(rng.categorical(b.probs()));
  p.weights.assign(count, 1.0 / static_cast<double>(count));
  return p;
}

Belief ParticleSet::to_belief(std::size_t n_targets) const {
  std::vector<double> hist(n_targets, 0.0);
  for (std::size_t i = 0; i < particles.size(); ++i) {
    if (particles[i] >= n_targets) throw ValidationError("particle outside target range");
    hist[particles[i]] += weights[i];
  }
  return Belief::normalized(std::move(hist));
}

ParticleSet particle_filter_step(const ParticleSet& p, std::size_t action, std::size_t obs,
                                 const DiscreteModel& model, Rng& rng, Resampling scheme) {
  const std::size_t count = p.particles.size();
  if (count == 0) throw ValidationError("particle set is empty");
  check_action(action, model);
  const auto& o = model.observations[action];

  std::vector<std::size_t> moved(count);
  std::vector<double> w(count);
  double total = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto col = model.transition.col(static_cast<Eigen::Index>(p.particles[i]));
    moved[i] = rng.categorical(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
    w[i] = p.weights[i] * o(static_cast<Eigen::Index>(obs), static_cast<Eigen::Index>(moved[i]));
    total += w[i];
  }
  if (!(total > 0.0)) throw DegeneracyError("all particle weights are zero");

  ParticleSet out;
  out.particles.reserve(count);
  if (scheme == Resampling::kSystematic) {
    const double step = total / static_cast<double>(count);
    double u = rng.uniform() * step;
    double cumulative = w[0];
    std::size_t i = 0;
    for (std::size_t m = 0; m < count; ++m) {
      while (u > cumulative && i + 1 < count) cumulative += w[++i];
      out.particles.push_back(moved[i]);
      u += step;
    }
  } else {
    for (std::size_t m = 0; m < count; ++m) out.particles.push_back(moved[rng.categorical(w)]);
  }
  out.weights.assign(count, 1.0 / static_cast<double>(count));
  return out;
}

double tv_distance(const Belief& a, const Belief& b) {
  if (a.size() != b.size()) throw ValidationError("tv_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace dan
