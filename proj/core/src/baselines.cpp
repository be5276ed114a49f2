#include "dan/baselines.hpp"

#include "dan/belief_engine.hpp"
#include "dan/errors.hpp"

namespace dan {

BaselineKind parse_baseline(const std::string& name) {
  if (name == "random_policy") return BaselineKind::kRandomPolicy;
  if (name == "coverage") return BaselineKind::kCoverage;
  if (name == "exact_oracle") return BaselineKind::kExactOracle;
  throw ValidationError("unknown baseline '" + name + "' (expected random_policy, coverage or exact_oracle)");
}

const char* to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::kRandomPolicy: return "random_policy";
    case BaselineKind::kCoverage: return "coverage";
    case BaselineKind::kExactOracle: return "exact_oracle";
  }
  return "?";
}

TrackingScore evaluate_exact_oracle(const TrackingTask& task, const std::vector<Track>& tracks,
                                    std::size_t max_episodes, std::uint64_t seed) {
  const DiscreteModel mx = factored_model(task.grid, task.cameras, Axis::kX);
  const DiscreteModel my = factored_model(task.grid, task.cameras, Axis::kY);
  const std::size_t n_eps = std::min(max_episodes, tracks.size());
  if (n_eps == 0) throw ValidationError("no tracks to evaluate");
  const std::size_t n_cams = task.cameras.size();

  TrackingScore score;
  score.per_person_reward.assign(1, 0.0);
  for (std::size_t e = 0; e < n_eps; ++e) {
    MultiPersonEpisode env(task.grid, task.cameras, {tracks[e]}, Rng(derive_seed(seed, "eval_episode", e)));
    Belief bx = Belief::uniform(mx.n_targets());
    Belief by = Belief::uniform(my.n_targets());
    double ep_reward = 0.0, ep_cov = 0.0;
    while (!env.done()) {
      std::size_t cam = 0;
      double best = -1.0;
      for (std::size_t a = 0; a < n_cams; ++a) {
        const double ig = expected_info_gain(bx, a, mx) + expected_info_gain(by, a, my);
        if (ig > best + 1e-12) {
          best = ig;
          cam = a;
        }
      }
      const auto st = env.step(cam);
      const auto& obs = st.obs[0];
      auto update = [&](Belief& b, Axis axis, const DiscreteModel& model) {
        try {
          b = bayes_update(b, cam, encode_reading(obs, axis, task.grid), model);
        } catch (const ImpossibleObservationError&) {
          b = Belief::uniform(model.n_targets());
        }
      };
      update(bx, Axis::kX, mx);
      update(by, Axis::kY, my);
      const bool correct = static_cast<int>(bx.argmax()) == st.truth[0].x &&
                           static_cast<int>(by.argmax()) == st.truth[0].y;
      ep_reward += correct;
      ep_cov += !obs.is_null();
    }
    score.mean_reward += ep_reward;
    score.mean_accuracy += ep_reward / static_cast<double>(env.length());
    score.mean_coverage += ep_cov;
  }
  const double n = static_cast<double>(n_eps);
  score.mean_reward /= n;
  score.mean_accuracy /= n;
  score.mean_coverage /= n;
  score.per_person_reward[0] = score.mean_reward;
  score.episodes = n_eps;
  return score;
}

BaselineResult run_baseline(BaselineKind kind, const TrackingTask& task, TrainConfig config, std::uint64_t seed,
                            EventLog* log) {
  BaselineResult out;
  switch (kind) {
    case BaselineKind::kExactOracle:
      out.score = evaluate_exact_oracle(task, task.data.test, config.eval_items, derive_seed(seed, "eval"));
      return out;
    case BaselineKind::kRandomPolicy:
      config.policy = PolicyKind::kRandom;
      break;
    case BaselineKind::kCoverage:
      config.policy = PolicyKind::kLearned;
      config.reward_mode = RewardMode::kCoverage;
      break;
  }
  auto run = train_tracking(task, config, seed, log);
  out.curve = std::move(run.curve);
  out.score = run.final_score;
  return out;
}

}  // namespace dan
