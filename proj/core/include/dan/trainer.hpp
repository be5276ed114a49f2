#pragma once

// DAN training loops for the tracking and attention environments, their
// evaluation, learning curves and the JSON-lines event log.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dan/attention_env.hpp"
#include "dan/dan_agent.hpp"
#include "dan/tracking_env.hpp"

namespace dan {

/// How actions are chosen during training and evaluation.
enum class PolicyKind {
  kLearned,  // epsilon-greedy on Q
  kRandom,   // uniform actions; only M is trained
};

const char* to_string(RewardMode m);
RewardMode parse_reward_mode(const std::string& s);
const char* to_string(RewardSchedule s);
RewardSchedule parse_reward_schedule(const std::string& s);

struct TrainConfig {
  std::size_t episodes = 3000;
  std::size_t warmup_steps = 3000;  // uniform actions, no updates
  double epsilon_initial = 0.2;
  double epsilon_final = 0.2;
  std::size_t epsilon_switch_episode = 0;  // epsilon_initial before, epsilon_final from here on
  double lr = 3e-3;
  double gamma = 0.9;
  double l2_scale = 0.0;
  int hidden = 32;
  std::size_t batch_episodes = 4;
  std::size_t trace_len = 12;
  std::size_t burn_in = 4;
  std::size_t update_period = 1;  // environment steps between updates
  std::size_t target_sync_steps = 500;
  std::size_t replay_capacity = 5000;
  double clip_norm = 5.0;
  RewardMode reward_mode = RewardMode::kDan;
  RewardSchedule reward_schedule = RewardSchedule::kContinuous;
  bool m_terminal_only = true;  // with the terminal schedule, train M on final histories only
  bool recompute_rewards = false;
  PolicyKind policy = PolicyKind::kLearned;
  std::size_t eval_every = 100;
  std::size_t eval_items = 100;

  static TrainConfig tracking_defaults();
  static TrainConfig attention_defaults();

  /// Throws ValidationError on inconsistent settings.
  void validate(std::size_t episode_len) const;
  double epsilon_at(std::size_t episode) const;
  bool trains_q() const { return policy == PolicyKind::kLearned; }
  bool trains_m() const { return reward_mode != RewardMode::kCoverage; }
  bool m_final_only() const { return m_terminal_only && reward_schedule == RewardSchedule::kTerminal; }
};

struct CurvePoint {
  std::size_t episode = 0;
  double mean_eval_reward = 0.0;
  double mean_eval_accuracy = 0.0;
  double td_loss = 0.0;  // mean over updates since the previous point; NaN if none
  double ce_loss = 0.0;
};

/// `episode,mean_eval_reward,mean_eval_accuracy,td_loss,ce_loss` with a header row.
std::string curve_to_csv(const std::vector<CurvePoint>& curve);

/// JSON-lines sink of {step, event, payload}. Writes nothing without a stream.
class EventLog {
 public:
  explicit EventLog(std::ostream* out = nullptr) : out_(out) {}
  /// `payload_json` must be a serialized JSON value.
  void emit(std::uint64_t step, const std::string& event, const std::string& payload_json);
  bool enabled() const noexcept { return out_ != nullptr; }

 private:
  std::ostream* out_;
};

// ---------------------------------------------------------------------------
// Tracking

struct TrackingTask {
  GridConfig grid;
  std::vector<CameraSpec> cameras;
  TrackDataset data;
};

/// Shared by both agents: one-hot(camera) ++ one-hot(x reading, null last)
/// ++ one-hot(y reading, null last).
int tracking_input_size(const TrackingTask& task);
Eigen::VectorXd encode_tracking_input(const TrackingTask& task, std::size_t camera, const EnvObservation& obs);

struct TrackingAgents {
  DanAgent x;
  DanAgent y;
};

TrackingAgents make_tracking_agents(const TrackingTask& task, const TrainConfig& config, std::uint64_t seed);

/// How evaluation picks cameras and predictions.
enum class TrackingEvalPolicy {
  kGreedy,        // camera maximizing mean Q; M predicts
  kRandom,        // uniform camera; M predicts
  kGreedyReadings // camera maximizing mean Q; the reading itself is the prediction
};

struct TrackingScore {
  double mean_reward = 0.0;    // per episode; per step 1 when both coordinates are right (mean over persons)
  double mean_accuracy = 0.0;  // mean_reward / episode_len
  double mean_coverage = 0.0;  // per episode; per step 1 when the reading is non-null (mean over persons)
  std::vector<double> per_person_reward;
  std::size_t episodes = 0;
};

/// Evaluates on consecutive groups of `persons` tracks (at most `max_episodes`
/// groups). Observation noise of episode i derives from (seed, i).
TrackingScore evaluate_tracking(const TrackingAgents& agents, const TrackingTask& task,
                                const std::vector<Track>& tracks, std::size_t persons, std::size_t max_episodes,
                                TrackingEvalPolicy policy, std::uint64_t seed);

struct TrackingRun {
  TrackingAgents agents;
  std::vector<CurvePoint> curve;
  TrackingScore final_score;
};

TrackingEvalPolicy eval_policy_for(const TrainConfig& config);

TrackingRun train_tracking(const TrackingTask& task, const TrainConfig& config, std::uint64_t seed,
                           EventLog* log = nullptr);

// ---------------------------------------------------------------------------
// Attention

struct AttentionTask {
  GlyphDataset data;
  GlimpseSpec glimpse;
};

/// one-hot(patch) ++ composite image.
int attention_input_size(const AttentionTask& task);
Eigen::VectorXd encode_attention_input(const AttentionTask& task, std::size_t patch,
                                       const std::vector<double>& composite);

DanAgent make_attention_agent(const AttentionTask& task, const TrainConfig& config, std::uint64_t seed);

struct AttentionScore {
  double final_accuracy = 0.0;     // M correct after the last glimpse
  double continuous_return = 0.0;  // mean per-episode count of correct steps
  double terminal_return = 0.0;    // equals final_accuracy
  std::size_t episodes = 0;
};

/// Greedy glimpses on the first `max_items` images.
AttentionScore evaluate_attention(const DanAgent& agent, const AttentionTask& task, const ImageSet& images,
                                  std::size_t max_items);

struct AttentionRun {
  DanAgent agent;
  std::vector<CurvePoint> curve;
  AttentionScore final_score;
};

/// Curve reward is the return under the configured schedule; accuracy is the
/// final-glimpse accuracy.
AttentionRun train_attention(const AttentionTask& task, const TrainConfig& config, std::uint64_t seed,
                             EventLog* log = nullptr);

/// First curve episode with accuracy >= threshold, or 0 if never reached.
std::size_t episodes_to_accuracy(const std::vector<CurvePoint>& curve, double threshold);

// ---------------------------------------------------------------------------
// Model files

/// {format: "dan-model", version, task, agents: {name: {q, m}}} with
/// network checkpoints embedded.
std::string tracking_model_to_json(const TrackingAgents& agents, const TrackingTask& task, const TrainConfig& config);
std::string attention_model_to_json(const DanAgent& agent, const AttentionTask& task, const TrainConfig& config);

struct LoadedModel {
  std::string task;  // "tracking" or "attention"
  std::vector<std::pair<std::string, DanAgent>> agents;
  GridConfig grid;
  std::vector<CameraSpec> cameras;
  GlimpseSpec glimpse;
  PolicyKind policy = PolicyKind::kLearned;
  RewardMode reward_mode = RewardMode::kDan;
};

LoadedModel model_from_json(const std::string& text);

}  // namespace dan
