#include "dan/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "dan/errors.hpp"

namespace dan {

using ojson = nlohmann::ordered_json;

const char* to_string(RewardMode m) {
  switch (m) {
    case RewardMode::kDan: return "dan";
    case RewardMode::kDanPlusCoverage: return "dan_plus_coverage";
    case RewardMode::kCoverage: return "coverage";
  }
  return "?";
}

RewardMode parse_reward_mode(const std::string& s) {
  if (s == "dan") return RewardMode::kDan;
  if (s == "dan_plus_coverage") return RewardMode::kDanPlusCoverage;
  if (s == "coverage") return RewardMode::kCoverage;
  throw ValidationError("unknown reward mode '" + s + "' (dan, dan_plus_coverage, coverage)");
}

const char* to_string(RewardSchedule s) { return s == RewardSchedule::kTerminal ? "terminal" : "continuous"; }

RewardSchedule parse_reward_schedule(const std::string& s) {
  if (s == "continuous") return RewardSchedule::kContinuous;
  if (s == "terminal") return RewardSchedule::kTerminal;
  throw ValidationError("unknown reward schedule '" + s + "' (continuous, terminal)");
}

TrainConfig TrainConfig::tracking_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::attention_defaults() {
  TrainConfig c;
  c.episodes = 3000;
  c.warmup_steps = 48;
  c.epsilon_initial = 1.0;
  c.epsilon_final = 0.05;
  c.epsilon_switch_episode = 1500;
  c.lr = 5e-4;
  c.gamma = 0.99;
  c.hidden = 64;
  c.update_period = 4;
  return c;
}

void TrainConfig::validate(std::size_t episode_len) const {
  auto fail = [](const std::string& m) { throw ValidationError(m); };
  if (episodes == 0) fail("episodes must be positive");
  if (!(epsilon_initial >= 0.0 && epsilon_initial <= 1.0) || !(epsilon_final >= 0.0 && epsilon_final <= 1.0))
    fail("epsilon values must be in [0, 1]");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must be in [0, 1]");
  if (!(l2_scale >= 0.0)) fail("l2_scale must be non-negative");
  if (hidden <= 0) fail("hidden must be positive");
  if (batch_episodes == 0) fail("batch_episodes must be positive");
  if (trace_len == 0) fail("trace_len must be positive");
  if (trace_len > episode_len)
    fail("trace_len (" + std::to_string(trace_len) + ") exceeds the episode length (" +
         std::to_string(episode_len) + ")");
  if (burn_in >= trace_len) fail("burn_in must be smaller than trace_len");
  if (update_period == 0) fail("update_period must be positive");
  if (target_sync_steps == 0) fail("target_sync_steps must be positive");
  if (replay_capacity < batch_episodes) fail("replay_capacity must hold at least one minibatch");
  if (!(clip_norm > 0.0)) fail("clip_norm must be positive");
  if (eval_every == 0 || eval_items == 0) fail("eval_every and eval_items must be positive");
}

double TrainConfig::epsilon_at(std::size_t episode) const {
  return episode < epsilon_switch_episode ? epsilon_initial : epsilon_final;
}

std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "episode,mean_eval_reward,mean_eval_accuracy,td_loss,ce_loss\n";
  char buf[256];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g\n", p.episode, p.mean_eval_reward,
                  p.mean_eval_accuracy, p.td_loss, p.ce_loss);
    out += buf;
  }
  return out;
}

void EventLog::emit(std::uint64_t step, const std::string& event, const std::string& payload_json) {
  if (!out_) return;
  ojson j;
  j["step"] = step;
  j["event"] = event;
  j["payload"] = ojson::parse(payload_json);
  *out_ << j.dump() << '\n';
}

std::size_t episodes_to_accuracy(const std::vector<CurvePoint>& curve, double threshold) {
  for (const auto& p : curve)
    if (p.mean_eval_accuracy >= threshold) return p.episode;
  return 0;
}

namespace {

ojson config_json(const TrainConfig& c) {
  ojson j;
  j["episodes"] = c.episodes;
  j["warmup_steps"] = c.warmup_steps;
  j["epsilon_initial"] = c.epsilon_initial;
  j["epsilon_final"] = c.epsilon_final;
  j["epsilon_switch_episode"] = c.epsilon_switch_episode;
  j["lr"] = c.lr;
  j["gamma"] = c.gamma;
  j["l2_scale"] = c.l2_scale;
  j["hidden"] = c.hidden;
  j["batch_episodes"] = c.batch_episodes;
  j["trace_len"] = c.trace_len;
  j["burn_in"] = c.burn_in;
  j["update_period"] = c.update_period;
  j["target_sync_steps"] = c.target_sync_steps;
  j["replay_capacity"] = c.replay_capacity;
  j["clip_norm"] = c.clip_norm;
  j["reward_mode"] = to_string(c.reward_mode);
  j["reward_schedule"] = to_string(c.reward_schedule);
  j["m_terminal_only"] = c.m_terminal_only;
  j["recompute_rewards"] = c.recompute_rewards;
  j["policy"] = c.policy == PolicyKind::kRandom ? "random" : "learned";
  j["eval_every"] = c.eval_every;
  j["eval_items"] = c.eval_items;
  return j;
}

// Running mean of losses between curve points.
struct LossMeter {
  double sum = 0.0;
  std::size_t n = 0;
  void add(double v) {
    if (std::isnan(v)) return;
    sum += v;
    ++n;
  }
  double take() {
    const double m = n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    sum = 0.0;
    n = 0;
    return m;
  }
};

struct Updater {
  const TrainConfig& config;
  std::uint64_t seed;
  Rng replay_rng;
  std::size_t updates = 0;
  LossMeter td, ce;

  Updater(const TrainConfig& c, std::uint64_t s) : config(c), seed(s), replay_rng(derive_seed(s, "replay")) {}

  void update(DanAgent& agent, const ReplayBuffer& buffer) {
    UpdateOptions opts;
    opts.burn_in = config.burn_in;
    opts.clip_norm = config.clip_norm;
    opts.dropout_seed = derive_seed(seed, "dropout", updates);
    if (config.recompute_rewards) opts.recompute_rewards = RewardSpec{config.reward_mode, config.reward_schedule};
    if (config.trains_q()) {
      const auto slices = buffer.sample(config.batch_episodes, config.trace_len, replay_rng);
      td.add(q_update(agent, slices, opts));
    }
    if (config.trains_m()) {
      const auto slices = buffer.sample(config.batch_episodes, config.trace_len, replay_rng, config.m_final_only());
      ce.add(m_update(agent, slices, opts, config.m_final_only()));
    }
    ++updates;
  }
};

Eigen::MatrixXd as_column(const Eigen::VectorXd& v) { return v; }

ojson score_json(double reward, double accuracy) {
  ojson j;
  j["mean_eval_reward"] = reward;
  j["mean_eval_accuracy"] = accuracy;
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tracking

int tracking_input_size(const TrackingTask& task) {
  return static_cast<int>(task.cameras.size()) + axis_size(task.grid, Axis::kX) + axis_size(task.grid, Axis::kY) + 2;
}

Eigen::VectorXd encode_tracking_input(const TrackingTask& task, std::size_t camera, const EnvObservation& obs) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(tracking_input_size(task));
  const std::size_t n_cams = task.cameras.size();
  const std::size_t y_base = n_cams + static_cast<std::size_t>(axis_size(task.grid, Axis::kX)) + 1;
  v(static_cast<Eigen::Index>(camera)) = 1.0;
  v(static_cast<Eigen::Index>(n_cams + encode_reading(obs, Axis::kX, task.grid))) = 1.0;
  v(static_cast<Eigen::Index>(y_base + encode_reading(obs, Axis::kY, task.grid))) = 1.0;
  return v;
}

TrackingAgents make_tracking_agents(const TrackingTask& task, const TrainConfig& config, std::uint64_t seed) {
  auto make = [&](Axis axis, const char* name) {
    AgentConfig ac;
    ac.input_size = tracking_input_size(task);
    ac.n_actions = static_cast<int>(task.cameras.size());
    ac.n_classes = axis_size(task.grid, axis);
    ac.hidden = default_hidden(config.hidden);
    ac.l2_scale = config.l2_scale;
    ac.lr = config.lr;
    ac.gamma = config.gamma;
    ac.epsilon = config.epsilon_initial;
    return make_agent(ac, derive_seed(seed, name));
  };
  return {make(Axis::kX, "agent_x"), make(Axis::kY, "agent_y")};
}

TrackingEvalPolicy eval_policy_for(const TrainConfig& config) {
  if (config.policy == PolicyKind::kRandom) return TrackingEvalPolicy::kRandom;
  if (config.reward_mode == RewardMode::kCoverage) return TrackingEvalPolicy::kGreedyReadings;
  return TrackingEvalPolicy::kGreedy;
}

TrackingScore evaluate_tracking(const TrackingAgents& agents, const TrackingTask& task,
                                const std::vector<Track>& tracks, std::size_t persons, std::size_t max_episodes,
                                TrackingEvalPolicy policy, std::uint64_t seed) {
  if (persons == 0) throw ValidationError("persons must be at least 1");
  const std::size_t n_eps = std::min(max_episodes, tracks.size() / persons);
  if (n_eps == 0) throw ValidationError("not enough tracks for one evaluation episode");
  const std::size_t n_cams = task.cameras.size();

  TrackingScore score;
  score.per_person_reward.assign(persons, 0.0);
  for (std::size_t e = 0; e < n_eps; ++e) {
    std::vector<Track> group(tracks.begin() + static_cast<std::ptrdiff_t>(e * persons),
                             tracks.begin() + static_cast<std::ptrdiff_t>((e + 1) * persons));
    MultiPersonEpisode env(task.grid, task.cameras, group, Rng(derive_seed(seed, "eval_episode", e)));
    Rng policy_rng(derive_seed(seed, "eval_policy", e));
    std::vector<RecurrentState> qx(persons), qy(persons), mx(persons), my(persons);
    std::vector<Eigen::VectorXd> qvx(persons), qvy(persons);
    const bool uses_q = policy != TrackingEvalPolicy::kRandom;
    if (uses_q) {
      const Eigen::MatrixXd zx = Eigen::MatrixXd::Zero(agents.x.q_spec.input_size, 1);
      const Eigen::MatrixXd zy = Eigen::MatrixXd::Zero(agents.y.q_spec.input_size, 1);
      for (std::size_t p = 0; p < persons; ++p) {
        qvx[p] = forward_step(agents.x.q, agents.x.q_spec, zx, qx[p]).col(0);
        qvy[p] = forward_step(agents.y.q, agents.y.q_spec, zy, qy[p]).col(0);
      }
    }
    const double len = static_cast<double>(env.length());
    double ep_reward = 0.0, ep_cov = 0.0;
    while (!env.done()) {
      std::size_t cam;
      if (uses_q) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_cams));
        for (std::size_t p = 0; p < persons; ++p) mean += qvx[p] + qvy[p];
        cam = static_cast<std::size_t>(argmax(mean));
      } else {
        cam = policy_rng.uniform_int(n_cams);
      }
      const auto step = env.step(cam);
      double step_reward = 0.0, step_cov = 0.0;
      for (std::size_t p = 0; p < persons; ++p) {
        const auto& obs = step.obs[p];
        const Eigen::MatrixXd ix = encode_tracking_input(task, cam, obs);
        const Eigen::MatrixXd& iy = ix;
        bool correct;
        if (policy == TrackingEvalPolicy::kGreedyReadings) {
          correct = !obs.is_null() && *obs.reading_x == step.truth[p].x && *obs.reading_y == step.truth[p].y;
        } else {
          const int px = argmax(forward_step(agents.x.m, agents.x.m_spec, ix, mx[p]).col(0));
          const int py = argmax(forward_step(agents.y.m, agents.y.m_spec, iy, my[p]).col(0));
          correct = px == step.truth[p].x && py == step.truth[p].y;
        }
        if (uses_q) {
          qvx[p] = forward_step(agents.x.q, agents.x.q_spec, ix, qx[p]).col(0);
          qvy[p] = forward_step(agents.y.q, agents.y.q_spec, iy, qy[p]).col(0);
        }
        step_reward += correct;
        step_cov += !obs.is_null();
        score.per_person_reward[p] += correct;
      }
      ep_reward += step_reward / static_cast<double>(persons);
      ep_cov += step_cov / static_cast<double>(persons);
    }
    score.mean_reward += ep_reward;
    score.mean_accuracy += ep_reward / len;
    score.mean_coverage += ep_cov;
  }
  const double n = static_cast<double>(n_eps);
  score.mean_reward /= n;
  score.mean_accuracy /= n;
  score.mean_coverage /= n;
  for (auto& r : score.per_person_reward) r /= n;
  score.episodes = n_eps;
  return score;
}

TrackingRun train_tracking(const TrackingTask& task, const TrainConfig& config, std::uint64_t seed, EventLog* log) {
  task.grid.validate();
  validate_layout(task.grid, task.cameras);
  if (task.data.train.empty() || task.data.test.empty()) throw ValidationError("tracking dataset split is empty");
  const std::size_t len = static_cast<std::size_t>(task.grid.episode_len);
  config.validate(len);
  EventLog null_log;
  EventLog& ev = log ? *log : null_log;

  TrackingRun run{make_tracking_agents(task, config, seed), {}, {}};
  DanAgent& ax = run.agents.x;
  DanAgent& ay = run.agents.y;
  ReplayBuffer buf_x(config.replay_capacity), buf_y(config.replay_capacity);
  Rng pick(derive_seed(seed, "track_pick"));
  Rng explore(derive_seed(seed, "explore"));
  Updater up(config, seed);
  const RewardSpec rspec{config.reward_mode, config.reward_schedule};
  const std::size_t n_cams = task.cameras.size();
  const std::uint64_t eval_seed = derive_seed(seed, "eval");
  const auto eval_policy = eval_policy_for(config);

  {
    ojson p = config_json(config);
    p["task"] = "tracking";
    p["seed"] = seed;
    ev.emit(0, "config", p.dump());
  }
  std::uint64_t steps = 0;
  bool warm_logged = false;
  double last_eps = -1.0;

  auto evaluate = [&](std::size_t episode) {
    const auto sc = evaluate_tracking(run.agents, task, task.data.test, 1, config.eval_items, eval_policy, eval_seed);
    CurvePoint pt{episode, sc.mean_reward, sc.mean_accuracy, up.td.take(), up.ce.take()};
    run.curve.push_back(pt);
    run.final_score = sc;
    ojson p = score_json(sc.mean_reward, sc.mean_accuracy);
    p["episode"] = episode;
    ev.emit(steps, "eval", p.dump());
  };

  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    const double eps = config.epsilon_at(episode);
    if (eps != last_eps) {
      ax.epsilon = ay.epsilon = eps;
      ojson p;
      p["episode"] = episode;
      p["epsilon"] = eps;
      ev.emit(steps, "epsilon", p.dump());
      last_eps = eps;
    }
    const Track& track = task.data.train[pick.uniform_int(task.data.train.size())];
    TrackingEpisode env(task.grid, task.cameras, track, Rng(derive_seed(seed, "train_env", episode)));

    EpisodeTrace tx, ty;
    tx.inputs.push_back(Eigen::VectorXd::Zero(ax.q_spec.input_size));
    ty.inputs.push_back(Eigen::VectorXd::Zero(ay.q_spec.input_size));
    RecurrentState qsx, qsy, msx, msy;
    const bool acts_greedy = config.policy == PolicyKind::kLearned;
    Eigen::VectorXd qvx, qvy;
    if (acts_greedy) {
      qvx = forward_step(ax.q, ax.q_spec, as_column(tx.inputs[0]), qsx).col(0);
      qvy = forward_step(ay.q, ay.q_spec, as_column(ty.inputs[0]), qsy).col(0);
    }
    double ep_return = 0.0;
    const std::size_t updates_before = up.updates;

    for (std::size_t t = 0; t < len; ++t) {
      const bool warm = steps < config.warmup_steps;
      std::size_t cam;
      if (warm || !acts_greedy)
        cam = explore.uniform_int(n_cams);
      else
        cam = static_cast<std::size_t>(select_action(Eigen::VectorXd((qvx + qvy) / 2.0), eps, explore));
      const auto st = env.step(cam);
      Eigen::VectorXd ix = encode_tracking_input(task, cam, st.obs);
      Eigen::VectorXd iy = ix;

      double rx, ry;
      if (config.reward_mode == RewardMode::kCoverage) {
        rx = ry = reward_schedule(config.reward_schedule, t, len, !st.obs.is_null());
      } else {
        const Eigen::VectorXd lx = forward_step(ax.m_target, ax.m_spec, as_column(ix), msx).col(0);
        const Eigen::VectorXd ly = forward_step(ay.m_target, ay.m_spec, as_column(iy), msy).col(0);
        rx = reward_from_logits(lx, st.truth.x, rspec, t, len, st.obs.is_null());
        ry = reward_from_logits(ly, st.truth.y, rspec, t, len, st.obs.is_null());
      }
      ep_return += (rx + ry) / 2.0;
      if (acts_greedy) {
        qvx = forward_step(ax.q, ax.q_spec, as_column(ix), qsx).col(0);
        qvy = forward_step(ay.q, ay.q_spec, as_column(iy), qsy).col(0);
      }
      tx.inputs.push_back(std::move(ix));
      ty.inputs.push_back(std::move(iy));
      tx.actions.push_back(static_cast<int>(cam));
      ty.actions.push_back(static_cast<int>(cam));
      tx.rewards.push_back(rx);
      ty.rewards.push_back(ry);
      tx.labels.push_back(st.truth.x);
      ty.labels.push_back(st.truth.y);
      tx.null_obs.push_back(st.obs.is_null());
      ty.null_obs.push_back(st.obs.is_null());

      ++steps;
      if (!warm && steps % config.update_period == 0) {
        up.update(ax, buf_x);
        up.update(ay, buf_y);
      }
      if (steps % config.target_sync_steps == 0) {
        sync_targets(ax);
        sync_targets(ay);
        ev.emit(steps, "target_sync", "{}");
      }
    }
    buf_x.add(std::move(tx));
    buf_y.add(std::move(ty));
    if (!warm_logged && steps >= config.warmup_steps) {
      ojson p;
      p["episode"] = episode;
      ev.emit(steps, "warmup_end", p.dump());
      warm_logged = true;
    }
    if (ev.enabled()) {
      ojson p;
      p["episode"] = episode;
      p["epsilon"] = eps;
      p["return"] = ep_return;
      p["updates"] = up.updates - updates_before;
      ev.emit(steps, "episode", p.dump());
    }
    if ((episode + 1) % config.eval_every == 0) evaluate(episode + 1);
  }
  if (config.episodes % config.eval_every != 0) evaluate(config.episodes);
  return run;
}

// ---------------------------------------------------------------------------
// Attention

int attention_input_size(const AttentionTask& task) {
  return task.glimpse.n_patches() + task.data.rows * task.data.cols;
}

Eigen::VectorXd encode_attention_input(const AttentionTask& task, std::size_t patch,
                                       const std::vector<double>& composite) {
  const int np = task.glimpse.n_patches();
  if (composite.size() != static_cast<std::size_t>(task.data.rows * task.data.cols))
    throw ValidationError("composite size does not match the dataset");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(attention_input_size(task));
  v(static_cast<Eigen::Index>(patch)) = 1.0;
  for (std::size_t i = 0; i < composite.size(); ++i) v(np + static_cast<Eigen::Index>(i)) = composite[i];
  return v;
}

DanAgent make_attention_agent(const AttentionTask& task, const TrainConfig& config, std::uint64_t seed) {
  AgentConfig ac;
  ac.input_size = attention_input_size(task);
  ac.n_actions = task.glimpse.n_patches();
  ac.n_classes = task.data.n_classes;
  ac.hidden = default_hidden(config.hidden);
  ac.l2_scale = config.l2_scale;
  ac.lr = config.lr;
  ac.gamma = config.gamma;
  ac.epsilon = config.epsilon_initial;
  return make_agent(ac, derive_seed(seed, "agent"));
}

AttentionScore evaluate_attention(const DanAgent& agent, const AttentionTask& task, const ImageSet& images,
                                  std::size_t max_items) {
  const std::size_t n = std::min(max_items, images.size());
  if (n == 0) throw ValidationError("no images to evaluate");
  AttentionScore sc;
  const Eigen::MatrixXd blank = Eigen::MatrixXd::Zero(attention_input_size(task), 1);
  for (std::size_t i = 0; i < n; ++i) {
    AttentionEpisode env(task.glimpse, images.images[i], images.rows, images.cols, images.labels[i]);
    RecurrentState qs, ms;
    Eigen::VectorXd qv = forward_step(agent.q, agent.q_spec, blank, qs).col(0);
    bool correct = false;
    while (!env.done()) {
      const auto patch = static_cast<std::size_t>(argmax(qv));
      const auto st = env.step(patch);
      const Eigen::MatrixXd in = encode_attention_input(task, patch, st.composite);
      correct = argmax(forward_step(agent.m, agent.m_spec, in, ms).col(0)) == st.label;
      sc.continuous_return += correct;
      qv = forward_step(agent.q, agent.q_spec, in, qs).col(0);
    }
    sc.final_accuracy += correct;
  }
  sc.final_accuracy /= static_cast<double>(n);
  sc.continuous_return /= static_cast<double>(n);
  sc.terminal_return = sc.final_accuracy;
  sc.episodes = n;
  return sc;
}

AttentionRun train_attention(const AttentionTask& task, const TrainConfig& config, std::uint64_t seed,
                             EventLog* log) {
  task.data.validate();
  task.glimpse.validate(task.data.rows, task.data.cols);
  const std::size_t len = static_cast<std::size_t>(task.glimpse.episode_len);
  config.validate(len);
  if (config.reward_mode == RewardMode::kCoverage)
    throw ValidationError("coverage reward is only defined for the tracking task");
  EventLog null_log;
  EventLog& ev = log ? *log : null_log;

  AttentionRun run{make_attention_agent(task, config, seed), {}, {}};
  DanAgent& ag = run.agent;
  ReplayBuffer buffer(config.replay_capacity);
  Rng pick(derive_seed(seed, "image_pick"));
  Rng explore(derive_seed(seed, "explore"));
  Updater up(config, seed);
  const RewardSpec rspec{RewardMode::kDan, config.reward_schedule};
  const auto n_patches = static_cast<std::size_t>(task.glimpse.n_patches());
  const auto& train = task.data.train;

  {
    ojson p = config_json(config);
    p["task"] = "attention";
    p["seed"] = seed;
    ev.emit(0, "config", p.dump());
  }
  std::uint64_t steps = 0;
  bool warm_logged = false;
  double last_eps = -1.0;

  auto evaluate = [&](std::size_t episode) {
    const auto sc = evaluate_attention(ag, task, task.data.test, config.eval_items);
    const double reward =
        config.reward_schedule == RewardSchedule::kTerminal ? sc.terminal_return : sc.continuous_return;
    run.curve.push_back({episode, reward, sc.final_accuracy, up.td.take(), up.ce.take()});
    run.final_score = sc;
    ojson p = score_json(reward, sc.final_accuracy);
    p["episode"] = episode;
    p["continuous_return"] = sc.continuous_return;
    ev.emit(steps, "eval", p.dump());
  };

  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    const double eps = config.epsilon_at(episode);
    if (eps != last_eps) {
      ag.epsilon = eps;
      ojson p;
      p["episode"] = episode;
      p["epsilon"] = eps;
      ev.emit(steps, "epsilon", p.dump());
      last_eps = eps;
    }
    const std::size_t idx = pick.uniform_int(train.size());
    AttentionEpisode env(task.glimpse, train.images[idx], train.rows, train.cols, train.labels[idx]);

    EpisodeTrace tr;
    tr.inputs.push_back(Eigen::VectorXd::Zero(ag.q_spec.input_size));
    RecurrentState qs, ms;
    const bool acts_greedy = config.policy == PolicyKind::kLearned;
    Eigen::VectorXd qv;
    if (acts_greedy) qv = forward_step(ag.q, ag.q_spec, as_column(tr.inputs[0]), qs).col(0);
    double ep_return = 0.0;
    const std::size_t updates_before = up.updates;

    for (std::size_t t = 0; t < len; ++t) {
      const bool warm = steps < config.warmup_steps;
      std::size_t patch;
      if (warm || !acts_greedy)
        patch = explore.uniform_int(n_patches);
      else
        patch = static_cast<std::size_t>(select_action(qv, eps, explore));
      const auto st = env.step(patch);
      Eigen::VectorXd in = encode_attention_input(task, patch, st.composite);
      const Eigen::VectorXd logits = forward_step(ag.m_target, ag.m_spec, as_column(in), ms).col(0);
      const double r = reward_from_logits(logits, st.label, rspec, t, len, false);
      ep_return += r;
      if (acts_greedy) qv = forward_step(ag.q, ag.q_spec, as_column(in), qs).col(0);
      tr.inputs.push_back(std::move(in));
      tr.actions.push_back(static_cast<int>(patch));
      tr.rewards.push_back(r);
      tr.labels.push_back(st.label);

      ++steps;
      if (!warm && steps % config.update_period == 0) up.update(ag, buffer);
      if (steps % config.target_sync_steps == 0) {
        sync_targets(ag);
        ev.emit(steps, "target_sync", "{}");
      }
    }
    buffer.add(std::move(tr));
    if (!warm_logged && steps >= config.warmup_steps) {
      ojson p;
      p["episode"] = episode;
      ev.emit(steps, "warmup_end", p.dump());
      warm_logged = true;
    }
    if (ev.enabled()) {
      ojson p;
      p["episode"] = episode;
      p["epsilon"] = eps;
      p["return"] = ep_return;
      p["updates"] = up.updates - updates_before;
      ev.emit(steps, "episode", p.dump());
    }
    if ((episode + 1) % config.eval_every == 0) evaluate(episode + 1);
  }
  if (config.episodes % config.eval_every != 0) evaluate(config.episodes);
  return run;
}

// ---------------------------------------------------------------------------
// Model files

namespace {

ojson agent_json(const DanAgent& a) {
  ojson j;
  j["q"] = ojson::parse(checkpoint_to_json({a.q_spec, a.q, "", a.q_opt.step}));
  j["m"] = ojson::parse(checkpoint_to_json({a.m_spec, a.m, "", a.m_opt.step}));
  j["epsilon"] = a.epsilon;
  j["gamma"] = a.gamma;
  return j;
}

DanAgent agent_from(const nlohmann::json& j) {
  DanAgent a;
  const auto q = checkpoint_from_json(j.at("q").dump());
  const auto m = checkpoint_from_json(j.at("m").dump());
  a.q_spec = q.spec;
  a.q = q.params;
  a.m_spec = m.spec;
  a.m = m.params;
  a.q_target = a.q;
  a.m_target = a.m;
  a.q_opt = AdamState::for_params(a.q, 1e-3);
  a.m_opt = AdamState::for_params(a.m, 1e-3);
  a.q_opt.step = q.step_counter;
  a.m_opt.step = m.step_counter;
  a.epsilon = j.at("epsilon").get<double>();
  a.gamma = j.at("gamma").get<double>();
  return a;
}

}  // namespace

std::string tracking_model_to_json(const TrackingAgents& agents, const TrackingTask& task, const TrainConfig& config) {
  ojson j;
  j["format"] = "dan-model";
  j["version"] = 1;
  j["task"] = "tracking";
  ojson g;
  g["width"] = task.grid.width;
  g["height"] = task.grid.height;
  g["n_cameras"] = task.grid.n_cameras;
  g["episode_len"] = task.grid.episode_len;
  g["walk_persistence"] = task.grid.walk_persistence;
  g["noise_adjacent"] = task.grid.noise_adjacent;
  g["miss_prob"] = task.grid.miss_prob;
  j["grid"] = g;
  j["layout"] = ojson::parse(layout_to_json(task.grid, task.cameras));
  j["train"] = config_json(config);
  j["agents"]["x"] = agent_json(agents.x);
  j["agents"]["y"] = agent_json(agents.y);
  return j.dump() + "\n";
}

std::string attention_model_to_json(const DanAgent& agent, const AttentionTask& task, const TrainConfig& config) {
  ojson j;
  j["format"] = "dan-model";
  j["version"] = 1;
  j["task"] = "attention";
  ojson g;
  g["rows"] = task.data.rows;
  g["cols"] = task.data.cols;
  g["n_classes"] = task.data.n_classes;
  g["patch_rows"] = task.glimpse.patch_rows;
  g["patch_cols"] = task.glimpse.patch_cols;
  g["episode_len"] = task.glimpse.episode_len;
  j["glimpse"] = g;
  j["train"] = config_json(config);
  j["agents"]["agent"] = agent_json(agent);
  return j.dump() + "\n";
}

LoadedModel model_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != "dan-model") throw ValidationError("not a dan model file");
    if (j.at("version").get<int>() != 1) throw ValidationError("unsupported model version");
    LoadedModel m;
    m.task = j.at("task").get<std::string>();
    const auto& tr = j.at("train");
    m.policy = tr.at("policy").get<std::string>() == "random" ? PolicyKind::kRandom : PolicyKind::kLearned;
    m.reward_mode = parse_reward_mode(tr.at("reward_mode").get<std::string>());
    if (m.task == "tracking") {
      const auto& g = j.at("grid");
      m.grid.width = g.at("width").get<int>();
      m.grid.height = g.at("height").get<int>();
      m.grid.n_cameras = g.at("n_cameras").get<int>();
      m.grid.episode_len = g.at("episode_len").get<int>();
      m.grid.walk_persistence = g.at("walk_persistence").get<double>();
      m.grid.noise_adjacent = g.at("noise_adjacent").get<double>();
      m.grid.miss_prob = g.at("miss_prob").get<double>();
      m.cameras = layout_from_json(j.at("layout").dump()).cameras;
      m.agents.emplace_back("x", agent_from(j.at("agents").at("x")));
      m.agents.emplace_back("y", agent_from(j.at("agents").at("y")));
    } else if (m.task == "attention") {
      const auto& g = j.at("glimpse");
      m.glimpse.patch_rows = g.at("patch_rows").get<int>();
      m.glimpse.patch_cols = g.at("patch_cols").get<int>();
      m.glimpse.episode_len = g.at("episode_len").get<int>();
      m.agents.emplace_back("agent", agent_from(j.at("agents").at("agent")));
    } else {
      throw ValidationError("unknown model task '" + m.task + "'");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace dan
