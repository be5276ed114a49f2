#pragma once

// Q / M network pair with target copies, episode replay and the DAN update
// rules (double DQN for Q, cross-entropy for M).

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dan/attention_env.hpp"
#include "dan/neural.hpp"
#include "dan/rng.hpp"
#include "dan/tracking_env.hpp"

namespace dan {

/// One agent's view of an episode. inputs[0] is the blank history start and
/// inputs[t + 1] encodes (actions[t], observation after it), so the history
/// h_t is inputs[0..t]. Transition t is <h_t, actions[t], rewards[t], h_{t+1},
/// labels[t]>; the last transition is terminal.
struct EpisodeTrace {
  std::vector<Eigen::VectorXd> inputs;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<int> labels;
  /// Whether the observation after actions[t] was null; empty means never.
  std::vector<bool> null_obs;

  std::size_t length() const noexcept { return actions.size(); }
  void validate() const;
};

/// Contiguous window of `length` transitions starting at transition `start`.
struct Slice {
  const EpisodeTrace* episode = nullptr;
  std::size_t start = 0;
  std::size_t length = 0;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  /// Appends a whole episode, evicting the oldest one when full.
  void add(EpisodeTrace episode);
  std::size_t size() const noexcept { return episodes_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const EpisodeTrace& at(std::size_t i) const { return episodes_.at(i); }

  /// Uniform episodes, uniform start. Episodes shorter than `length` are
  /// used whole. With `end_aligned` every slice ends at the episode end.
  /// Returns empty when the buffer holds fewer than `count` episodes.
  std::vector<Slice> sample(std::size_t count, std::size_t length, Rng& rng, bool end_aligned = false) const;

 private:
  std::size_t capacity_;
  std::deque<EpisodeTrace> episodes_;
};

struct AgentConfig {
  int input_size = 0;
  int n_actions = 0;
  int n_classes = 0;
  std::vector<LayerSpec> hidden;  // layers before the output layer
  double l2_scale = 0.01;
  double lr = 1e-3;
  double gamma = 0.99;
  double epsilon = 0.1;

  void validate() const;
};

/// Default trunk: dense(width) -> relu -> recurrent(width).
std::vector<LayerSpec> default_hidden(int width);

struct DanAgent {
  NetworkSpec q_spec;
  NetworkSpec m_spec;
  Parameters q;
  Parameters m;
  Parameters q_target;
  Parameters m_target;
  AdamState q_opt;
  AdamState m_opt;
  double epsilon = 0.1;
  double gamma = 0.99;

  int n_actions() const { return q_spec.output_size(); }
  int n_classes() const { return m_spec.output_size(); }
};

DanAgent make_agent(const AgentConfig& config, std::uint64_t seed);

/// Index of the largest entry, ties to the lowest index.
int argmax(const Eigen::VectorXd& v);

/// With probability epsilon a uniform action, else argmax(q_values).
int select_action(const Eigen::VectorXd& q_values, double epsilon, Rng& rng);
/// Runs Q over the history and applies the agent's epsilon-greedy rule.
int select_action(const DanAgent& agent, const Sequence& history, Rng& rng);

struct RewardSpec {
  RewardMode mode = RewardMode::kDan;
  RewardSchedule schedule = RewardSchedule::kContinuous;
};

/// Reward for transition `step_idx` given the M-target logits at h_{t+1}.
double reward_from_logits(const Eigen::VectorXd& logits, int label, RewardSpec spec, std::size_t step_idx,
                          std::size_t episode_len, bool observation_null);
/// Same, running the M-target network over `history` (h_{t+1}).
double prediction_reward(const DanAgent& agent, const Sequence& history, int label, RewardSpec spec,
                         std::size_t step_idx, std::size_t episode_len, bool observation_null);

/// r for terminal transitions, else r + gamma * Q_target(h')[argmax Q(h')].
double double_dqn_target(const DanAgent& agent, double reward, const Sequence& next_history, bool terminal);

struct UpdateOptions {
  std::size_t burn_in = 4;
  double clip_norm = 5.0;
  std::uint64_t dropout_seed = 0;
  /// When set, q_update recomputes rewards from the current M-target instead
  /// of using the ones stored at collection time.
  std::optional<RewardSpec> recompute_rewards;
};

/// Steps of a slice that contribute to the loss: all of them when the slice
/// starts at the episode start (the zero initial state is exact there),
/// otherwise those after the burn-in.
bool loss_step(const Slice& s, std::size_t k, std::size_t burn_in);

/// Mean squared TD error over the loss steps and one Adam step on Q.
/// Returns the loss before the step; NaN when `slices` is empty (not ready).
double q_update(DanAgent& agent, const std::vector<Slice>& slices, const UpdateOptions& opts);

/// Mean cross-entropy of M at h_{t+1} against labels[t] over the loss steps
/// (only the final transition when `terminal_only`) and one Adam step on M.
double m_update(DanAgent& agent, const std::vector<Slice>& slices, const UpdateOptions& opts,
                bool terminal_only = false);

void sync_targets(DanAgent& agent);

/// Stacks the inputs of a batch of slices: step k of the result holds
/// inputs[start + k] of every slice, for k in [0, length].
Sequence batch_inputs(const std::vector<Slice>& slices);

}  // namespace dan
