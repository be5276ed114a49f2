#include "dan/dan_agent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dan/errors.hpp"

namespace dan {

void AgentConfig::validate() const {
  if (input_size <= 0 || n_actions <= 0 || n_classes <= 0)
    throw ValidationError("agent sizes must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must be in [0, 1]");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon must be in [0, 1]");
  if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
}

std::vector<LayerSpec> default_hidden(int width) {
  return {LayerSpec::dense(width), LayerSpec::relu(), LayerSpec::recurrent(width)};
}

DanAgent make_agent(const AgentConfig& config, std::uint64_t seed) {
  config.validate();
  DanAgent a;
  a.q_spec.input_size = config.input_size;
  a.q_spec.layers = config.hidden;
  a.q_spec.layers.push_back(LayerSpec::output(config.n_actions));
  a.q_spec.l2_scale = config.l2_scale;
  a.m_spec = a.q_spec;
  a.m_spec.layers.back() = LayerSpec::output(config.n_classes);
  a.q_spec.validate();
  a.q = init_parameters(a.q_spec, derive_seed(seed, "q_init"));
  a.m = init_parameters(a.m_spec, derive_seed(seed, "m_init"));
  a.q_target = a.q;
  a.m_target = a.m;
  a.q_opt = AdamState::for_params(a.q, config.lr);
  a.m_opt = AdamState::for_params(a.m, config.lr);
  a.epsilon = config.epsilon;
  a.gamma = config.gamma;
  return a;
}

int argmax(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw ValidationError("argmax of an empty vector");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = i;
  return static_cast<int>(best);
}

int select_action(const Eigen::VectorXd& q_values, double epsilon, Rng& rng) {
  if (epsilon > 0.0 && rng.uniform() < epsilon) return static_cast<int>(rng.uniform_int(q_values.size()));
  return argmax(q_values);
}

namespace {

Eigen::VectorXd last_output(const Parameters& p, const NetworkSpec& spec, const Sequence& history) {
  if (history.empty()) throw ValidationError("empty history");
  const auto tr = forward(p, spec, history, ForwardMode::kEval);
  return tr.output(tr.steps() - 1).col(0);
}

}  // namespace

int select_action(const DanAgent& agent, const Sequence& history, Rng& rng) {
  return select_action(last_output(agent.q, agent.q_spec, history), agent.epsilon, rng);
}

double reward_from_logits(const Eigen::VectorXd& logits, int label, RewardSpec spec, std::size_t step_idx,
                          std::size_t episode_len, bool observation_null) {
  if (step_idx >= episode_len) throw ValidationError("step index outside the episode");
  if (spec.schedule == RewardSchedule::kTerminal && step_idx + 1 != episode_len) return 0.0;
  const bool correct = argmax(logits) == label;
  EnvObservation obs;
  if (!observation_null) obs.reading_x = 0;
  return coverage_reward(obs, correct, spec.mode);
}

double prediction_reward(const DanAgent& agent, const Sequence& history, int label, RewardSpec spec,
                         std::size_t step_idx, std::size_t episode_len, bool observation_null) {
  return reward_from_logits(last_output(agent.m_target, agent.m_spec, history), label, spec, step_idx,
                            episode_len, observation_null);
}

double double_dqn_target(const DanAgent& agent, double reward, const Sequence& next_history, bool terminal) {
  if (terminal) return reward;
  const int a = argmax(last_output(agent.q, agent.q_spec, next_history));
  return reward + agent.gamma * last_output(agent.q_target, agent.q_spec, next_history)(a);
}

bool loss_step(const Slice& s, std::size_t k, std::size_t burn_in) { return s.start == 0 || k >= burn_in; }

Sequence batch_inputs(const std::vector<Slice>& slices) {
  if (slices.empty()) return {};
  const std::size_t len = slices[0].length;
  for (const auto& s : slices)
    if (s.length != len) throw ValidationError("slices in a batch must share a length");
  const Eigen::Index width = slices[0].episode->inputs[0].size();
  const Eigen::Index batch = static_cast<Eigen::Index>(slices.size());
  Sequence seq(len + 1, Eigen::MatrixXd(width, batch));
  for (std::size_t k = 0; k <= len; ++k)
    for (Eigen::Index b = 0; b < batch; ++b) {
      const auto& s = slices[static_cast<std::size_t>(b)];
      seq[k].col(b) = s.episode->inputs[s.start + k];
    }
  return seq;
}

double q_update(DanAgent& agent, const std::vector<Slice>& slices, const UpdateOptions& opts) {
  if (slices.empty()) return std::numeric_limits<double>::quiet_NaN();
  const Sequence inputs = batch_inputs(slices);
  const std::size_t len = slices[0].length;
  const auto online = forward(agent.q, agent.q_spec, inputs, ForwardMode::kTrain, opts.dropout_seed);
  const auto target = forward(agent.q_target, agent.q_spec, inputs, ForwardMode::kEval);
  const bool has_dropout = std::any_of(agent.q_spec.layers.begin(), agent.q_spec.layers.end(),
                                       [](const LayerSpec& l) { return l.kind == LayerKind::kDropout; });
  const auto chooser = has_dropout ? forward(agent.q, agent.q_spec, inputs, ForwardMode::kEval) : online;
  std::optional<ForwardTrace> m_target;
  if (opts.recompute_rewards) m_target = forward(agent.m_target, agent.m_spec, inputs, ForwardMode::kEval);

  Sequence grads(len + 1, Eigen::MatrixXd::Zero(agent.n_actions(), static_cast<Eigen::Index>(slices.size())));
  std::size_t count = 0;
  for (const auto& s : slices)
    for (std::size_t k = 0; k < len; ++k) count += loss_step(s, k, opts.burn_in);
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();

  double loss = 0.0;
  for (std::size_t b = 0; b < slices.size(); ++b) {
    const auto& s = slices[b];
    const auto& ep = *s.episode;
    const auto col = static_cast<Eigen::Index>(b);
    for (std::size_t k = 0; k < len; ++k) {
      if (!loss_step(s, k, opts.burn_in)) continue;
      const std::size_t t = s.start + k;
      double y = ep.rewards[t];
      if (m_target) {
        const bool null_obs = !ep.null_obs.empty() && ep.null_obs[t];
        y = reward_from_logits(m_target->output(k + 1).col(col), ep.labels[t], *opts.recompute_rewards, t,
                               ep.length(), null_obs);
      }
      if (t + 1 < ep.length()) {
        const int a_star = argmax(chooser.output(k + 1).col(col));
        y += agent.gamma * target.output(k + 1)(a_star, col);
      }
      const double q = online.output(k)(ep.actions[t], col);
      loss += (q - y) * (q - y);
      grads[k](ep.actions[t], col) = 2.0 * (q - y) / static_cast<double>(count);
    }
  }
  Gradients g = backward(agent.q, agent.q_spec, online, grads);
  clip_global_norm(g, opts.clip_norm);
  adam_step(agent.q, g, agent.q_opt);
  return loss / static_cast<double>(count);
}

double m_update(DanAgent& agent, const std::vector<Slice>& slices, const UpdateOptions& opts, bool terminal_only) {
  if (slices.empty()) return std::numeric_limits<double>::quiet_NaN();
  const Sequence inputs = batch_inputs(slices);
  const std::size_t len = slices[0].length;
  const auto online = forward(agent.m, agent.m_spec, inputs, ForwardMode::kTrain, opts.dropout_seed);

  auto active = [&](const Slice& s, std::size_t k) {
    if (terminal_only) return s.start + k + 1 == s.episode->length();
    return loss_step(s, k, opts.burn_in);
  };
  std::size_t count = 0;
  for (const auto& s : slices)
    for (std::size_t k = 0; k < len; ++k) count += active(s, k);
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();

  Sequence grads(len + 1, Eigen::MatrixXd::Zero(agent.n_classes(), static_cast<Eigen::Index>(slices.size())));
  double loss = 0.0;
  for (std::size_t b = 0; b < slices.size(); ++b) {
    const auto& s = slices[b];
    const auto col = static_cast<Eigen::Index>(b);
    for (std::size_t k = 0; k < len; ++k) {
      if (!active(s, k)) continue;
      const auto ce = cross_entropy_loss(online.output(k + 1).col(col), s.episode->labels[s.start + k]);
      loss += ce.loss;
      grads[k + 1].col(col) = ce.grad / static_cast<double>(count);
    }
  }
  Gradients g = backward(agent.m, agent.m_spec, online, grads);
  clip_global_norm(g, opts.clip_norm);
  adam_step(agent.m, g, agent.m_opt);
  return loss / static_cast<double>(count);
}

void sync_targets(DanAgent& agent) {
  agent.q_target = agent.q;
  agent.m_target = agent.m;
}

}  // namespace dan
