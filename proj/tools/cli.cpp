#include "cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include "dan/baselines.hpp"
#include "dan/convex_bounds.hpp"
#include "dan/errors.hpp"
#include "dan/neural.hpp"

namespace dan::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

Task parse_task(const std::string& name) {
  if (name == "tracking") return Task::kTracking;
  if (name == "attention") return Task::kAttention;
  throw ValidationError("unknown task '" + name + "' (tracking, attention)");
}

const char* to_string(Task task) { return task == Task::kTracking ? "tracking" : "attention"; }

void RunConfig::validate() const {
  if (task == Task::kTracking) {
    grid.validate();
    if (tracks < 2) throw ValidationError("grid.tracks must be at least 2");
    train.validate(static_cast<std::size_t>(grid.episode_len));
  } else {
    if (glyphs_per_class < 2) throw ValidationError("glyphs.per_class must be at least 2");
    if (!(glyph_noise >= 0.0 && glyph_noise <= 1.0)) throw ValidationError("glyphs.pixel_noise must be in [0, 1]");
    glimpse.validate(12, 12);
    train.validate(static_cast<std::size_t>(glimpse.episode_len));
  }
}

RunConfig default_run_config(Task task) {
  RunConfig c;
  c.task = task;
  c.train = task == Task::kTracking ? TrainConfig::tracking_defaults() : TrainConfig::attention_defaults();
  return c;
}

namespace {

// ---------------------------------------------------------------------------
// Config schema

[[noreturn]] void bad_value(const std::string& key, const std::string& want, const std::string& got) {
  throw ValidationError("config key '" + key + "': expected " + want + ", got '" + got + "'");
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) bad_value(key, "an integer", v);
  return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const long long n = to_int(key, v);
  if (n < 0) bad_value(key, "a non-negative integer", v);
  return static_cast<std::size_t>(n);
}

double to_real(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  in.imbue(std::locale::classic());
  double out = 0.0;
  in >> out;
  if (in.fail() || !in.eof()) bad_value(key, "a number", v);
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, "true or false", v);
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(RunConfig&, const std::string& name, const std::string& value)> set;
  std::function<ojson(const RunConfig&)> get;
};

#define DAN_INT_FIELD(sec, name, expr)                                                                          \
  Field {                                                                                                       \
    sec, #name, [](RunConfig& c, const std::string& k, const std::string& v) { expr = static_cast<int>(to_int(k, v)); }, \
        [](const RunConfig& c) { return ojson(expr); }                                                          \
  }
#define DAN_COUNT_FIELD(sec, name, expr)                                                                         \
  Field {                                                                                                        \
    sec, #name, [](RunConfig& c, const std::string& k, const std::string& v) { expr = to_count(k, v); },         \
        [](const RunConfig& c) { return ojson(expr); }                                                           \
  }
#define DAN_REAL_FIELD(sec, name, expr)                                                                          \
  Field {                                                                                                        \
    sec, #name, [](RunConfig& c, const std::string& k, const std::string& v) { expr = to_real(k, v); },          \
        [](const RunConfig& c) { return ojson(expr); }                                                           \
  }
#define DAN_BOOL_FIELD(sec, name, expr)                                                                          \
  Field {                                                                                                        \
    sec, #name, [](RunConfig& c, const std::string& k, const std::string& v) { expr = to_bool(k, v); },          \
        [](const RunConfig& c) { return ojson(expr); }                                                           \
  }

const std::vector<Field>& schema() {
  static const std::vector<Field> fields = {
      Field{"run", "seed",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.seed = static_cast<std::uint64_t>(to_count(k, v));
            },
            [](const RunConfig& c) { return ojson(c.seed); }},
      DAN_INT_FIELD("grid", width, c.grid.width),
      DAN_INT_FIELD("grid", height, c.grid.height),
      DAN_INT_FIELD("grid", cameras, c.grid.n_cameras),
      DAN_INT_FIELD("grid", episode_len, c.grid.episode_len),
      DAN_REAL_FIELD("grid", walk_persistence, c.grid.walk_persistence),
      DAN_REAL_FIELD("grid", noise_adjacent, c.grid.noise_adjacent),
      DAN_REAL_FIELD("grid", miss_prob, c.grid.miss_prob),
      DAN_COUNT_FIELD("grid", tracks, c.tracks),
      DAN_COUNT_FIELD("glyphs", per_class, c.glyphs_per_class),
      DAN_REAL_FIELD("glyphs", pixel_noise, c.glyph_noise),
      DAN_INT_FIELD("glimpse", patch_rows, c.glimpse.patch_rows),
      DAN_INT_FIELD("glimpse", patch_cols, c.glimpse.patch_cols),
      DAN_INT_FIELD("glimpse", episode_len, c.glimpse.episode_len),
      DAN_COUNT_FIELD("train", episodes, c.train.episodes),
      DAN_COUNT_FIELD("train", warmup_steps, c.train.warmup_steps),
      DAN_REAL_FIELD("train", epsilon_initial, c.train.epsilon_initial),
      DAN_REAL_FIELD("train", epsilon_final, c.train.epsilon_final),
      DAN_COUNT_FIELD("train", epsilon_switch_episode, c.train.epsilon_switch_episode),
      DAN_REAL_FIELD("train", lr, c.train.lr),
      DAN_REAL_FIELD("train", gamma, c.train.gamma),
      DAN_REAL_FIELD("train", l2_scale, c.train.l2_scale),
      DAN_INT_FIELD("train", hidden, c.train.hidden),
      DAN_COUNT_FIELD("train", batch_episodes, c.train.batch_episodes),
      DAN_COUNT_FIELD("train", trace_len, c.train.trace_len),
      DAN_COUNT_FIELD("train", burn_in, c.train.burn_in),
      DAN_COUNT_FIELD("train", update_period, c.train.update_period),
      DAN_COUNT_FIELD("train", target_sync_steps, c.train.target_sync_steps),
      DAN_COUNT_FIELD("train", replay_capacity, c.train.replay_capacity),
      DAN_REAL_FIELD("train", clip_norm, c.train.clip_norm),
      Field{"train", "reward_mode",
            [](RunConfig& c, const std::string&, const std::string& v) { c.train.reward_mode = parse_reward_mode(v); },
            [](const RunConfig& c) { return ojson(to_string(c.train.reward_mode)); }},
      Field{"train", "reward_schedule",
            [](RunConfig& c, const std::string&, const std::string& v) {
              c.train.reward_schedule = parse_reward_schedule(v);
            },
            [](const RunConfig& c) { return ojson(to_string(c.train.reward_schedule)); }},
      DAN_BOOL_FIELD("train", m_terminal_only, c.train.m_terminal_only),
      DAN_BOOL_FIELD("train", recompute_rewards, c.train.recompute_rewards),
      DAN_COUNT_FIELD("train", eval_every, c.train.eval_every),
      DAN_COUNT_FIELD("train", eval_items, c.train.eval_items),
  };
  return fields;
}

#undef DAN_INT_FIELD
#undef DAN_COUNT_FIELD
#undef DAN_REAL_FIELD
#undef DAN_BOOL_FIELD

ojson config_object(const RunConfig& c) {
  ojson j;
  j["task"] = to_string(c.task);
  for (const auto& f : schema()) j[f.section][f.key] = f.get(c);
  return j;
}

// ---------------------------------------------------------------------------
// Files

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ValidationError("cannot create output directory " + dir + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + (dir_ / name).string());
    out << content;
    files_.push_back(name);
  }

  fs::path path(const std::string& name) const { return dir_ / name; }
  void note(const std::string& name) { files_.push_back(name); }

  /// Writes manifest.json listing everything produced so far.
  void finish(const std::string& command, std::uint64_t seed, const ojson& config) {
    ojson m;
    m["command"] = command;
    m["seed"] = seed;
    m["config"] = config;
    auto files = files_;
    files.push_back("manifest.json");
    std::sort(files.begin(), files.end());
    m["files"] = files;
    write("manifest.json", m.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

ojson tracking_score_json(const TrackingScore& s) {
  ojson j;
  j["mean_reward"] = s.mean_reward;
  j["mean_accuracy"] = s.mean_accuracy;
  j["mean_coverage"] = s.mean_coverage;
  j["per_person_reward"] = s.per_person_reward;
  j["episodes"] = s.episodes;
  return j;
}

ojson attention_score_json(const AttentionScore& s) {
  ojson j;
  j["final_accuracy"] = s.final_accuracy;
  j["continuous_return"] = s.continuous_return;
  j["terminal_return"] = s.terminal_return;
  j["episodes"] = s.episodes;
  return j;
}

TrackingTask tracking_task(const RunConfig& c, const std::string& data_dir) {
  if (data_dir.empty()) {
    const auto cams = default_camera_layout(c.grid);
    return {c.grid, cams, generate_dataset(c.grid, cams, c.tracks, derive_seed(c.seed, "data"))};
  }
  const fs::path dir(data_dir);
  const auto layout = layout_from_json(read_text(dir / "layout.json"));
  GridConfig grid = c.grid;
  grid.width = layout.width;
  grid.height = layout.height;
  grid.n_cameras = static_cast<int>(layout.cameras.size());
  TrackingTask task{grid, layout.cameras, {}};
  task.data.train = tracks_from_jsonl(read_text(dir / "train.jsonl"));
  task.data.test = tracks_from_jsonl(read_text(dir / "test.jsonl"));
  return task;
}

AttentionTask attention_task(const RunConfig& c, const std::string& data_dir) {
  if (data_dir.empty())
    return {make_glyph_dataset(derive_seed(c.seed, "data"), c.glyphs_per_class, c.glyph_noise), c.glimpse};
  fs::path path(data_dir);
  if (fs::is_directory(path)) path /= "glyphs.json";
  return {glyphs_from_json(read_text(path)), c.glimpse};
}

RunConfig resolve_config(Task task, const std::string& config_path, std::optional<std::uint64_t> seed) {
  RunConfig c = config_path.empty() ? default_run_config(task) : load_run_config(config_path, task);
  if (seed) c.seed = *seed;
  return c;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_verify_bounds(std::size_t ny, double r_correct, double r_incorrect, const std::string& sampler_text,
                      std::uint64_t seed, const std::string& out_path, std::ostream& out, std::ostream& err) {
  const PredictionRewardSpec spec{r_correct, r_incorrect, ny};
  const auto sampler = parse_sampler(sampler_text, seed);
  const auto report = verify_bound_sweep(spec, sampler);
  const auto text = to_json(report);
  out << text << "\n";
  if (!out_path.empty()) {
    const fs::path p(out_path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ValidationError("cannot write " + out_path);
    f << text << "\n";
  }
  if (!report.holds) {
    err << "bound violated: max_error " << report.max_error << " exceeds theorem_bound " << report.theorem_bound
        << "\n";
    return kCheckFailed;
  }
  return kOk;
}

int cmd_gen_data(const std::string& kind, RunConfig c, const std::string& out_dir, std::ostream& out) {
  OutputDir dir(out_dir);
  if (kind == "tracking") {
    c.task = Task::kTracking;
    c.grid.validate();
    if (c.tracks < 2) throw ValidationError("tracks must be at least 2");
    const auto cams = default_camera_layout(c.grid);
    const auto ds = generate_dataset(c.grid, cams, c.tracks, derive_seed(c.seed, "data"));
    dir.write("train.jsonl", tracks_to_jsonl(ds.train));
    dir.write("test.jsonl", tracks_to_jsonl(ds.test));
    dir.write("layout.json", layout_to_json(c.grid, cams) + "\n");
    ojson cfg = config_object(c);
    cfg.erase("train");
    cfg.erase("glyphs");
    cfg.erase("glimpse");
    cfg["split"] = {{"train", ds.train.size()}, {"test", ds.test.size()}};
    dir.finish("gen-data tracking", c.seed, cfg);
    out << "wrote " << ds.train.size() << " train / " << ds.test.size() << " test tracks to " << out_dir << "\n";
  } else if (kind == "glyphs") {
    c.task = Task::kAttention;
    if (c.glyphs_per_class < 2) throw ValidationError("per_class must be at least 2");
    if (!(c.glyph_noise >= 0.0 && c.glyph_noise <= 1.0)) throw ValidationError("pixel_noise must be in [0, 1]");
    const auto ds = make_glyph_dataset(derive_seed(c.seed, "data"), c.glyphs_per_class, c.glyph_noise);
    dir.write("glyphs.json", glyphs_to_json(ds) + "\n");
    write_idx(ds.train, dir.path("train-images.idx3-ubyte").string(), dir.path("train-labels.idx1-ubyte").string());
    write_idx(ds.test, dir.path("test-images.idx3-ubyte").string(), dir.path("test-labels.idx1-ubyte").string());
    for (const char* f : {"train-images.idx3-ubyte", "train-labels.idx1-ubyte", "test-images.idx3-ubyte",
                          "test-labels.idx1-ubyte"})
      dir.note(f);
    ojson cfg;
    cfg["task"] = "glyphs";
    cfg["per_class"] = c.glyphs_per_class;
    cfg["pixel_noise"] = c.glyph_noise;
    cfg["split"] = {{"train", ds.train.size()}, {"test", ds.test.size()}};
    dir.finish("gen-data glyphs", c.seed, cfg);
    out << "wrote " << ds.train.size() << " train / " << ds.test.size() << " test glyphs to " << out_dir << "\n";
  } else {
    throw ValidationError("unknown dataset kind '" + kind + "' (tracking, glyphs)");
  }
  return kOk;
}

int cmd_train(const RunConfig& c, const std::string& data_dir, const std::string& out_dir, std::ostream& out) {
  c.validate();
  OutputDir dir(out_dir);
  std::ostringstream events;
  EventLog log(&events);
  if (c.task == Task::kTracking) {
    const auto task = tracking_task(c, data_dir);
    const auto run = train_tracking(task, c.train, c.seed, &log);
    dir.write("curves.csv", curve_to_csv(run.curve));
    dir.write("events.jsonl", events.str());
    dir.write("model.json", tracking_model_to_json(run.agents, task, c.train) + "\n");
    dir.write("score.json", tracking_score_json(run.final_score).dump(2) + "\n");
    out << "final mean_reward " << run.final_score.mean_reward << " accuracy " << run.final_score.mean_accuracy
        << "\n";
  } else {
    const auto task = attention_task(c, data_dir);
    const auto run = train_attention(task, c.train, c.seed, &log);
    dir.write("curves.csv", curve_to_csv(run.curve));
    dir.write("events.jsonl", events.str());
    dir.write("model.json", attention_model_to_json(run.agent, task, c.train) + "\n");
    ojson score = attention_score_json(run.final_score);
    score["episodes_to_80"] = episodes_to_accuracy(run.curve, 0.8);
    dir.write("score.json", score.dump(2) + "\n");
    out << "final accuracy " << run.final_score.final_accuracy << " continuous_return "
        << run.final_score.continuous_return << "\n";
  }
  ojson cfg = config_object(c);
  cfg["data"] = data_dir.empty() ? ojson("generated") : ojson(data_dir);
  dir.finish(std::string("train ") + to_string(c.task), c.seed, cfg);
  return kOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, std::size_t persons, std::size_t max_episodes,
             std::uint64_t seed, const std::string& out_dir, std::ostream& out) {
  if (persons == 0) throw ValidationError("--multi-person must be at least 1");
  const auto model = model_from_json(read_text(checkpoint));
  if (data.empty()) throw ValidationError("--data is required");
  ojson result;
  if (model.task == "tracking") {
    TrackingTask task{model.grid, model.cameras, {}};
    fs::path p(data);
    if (fs::is_directory(p)) p /= "test.jsonl";
    const auto tracks = tracks_from_jsonl(read_text(p));
    TrackingAgents agents{model.agents.at(0).second, model.agents.at(1).second};
    TrainConfig policy_cfg;
    policy_cfg.policy = model.policy;
    policy_cfg.reward_mode = model.reward_mode;
    const auto score =
        evaluate_tracking(agents, task, tracks, persons, max_episodes, eval_policy_for(policy_cfg), seed);
    for (std::size_t i = 0; i < score.per_person_reward.size(); ++i)
      out << "person " << i << " mean_reward " << score.per_person_reward[i] << "\n";
    out << "mean_reward " << score.mean_reward << " accuracy " << score.mean_accuracy << " coverage "
        << score.mean_coverage << " episodes " << score.episodes << "\n";
    result = tracking_score_json(score);
  } else {
    if (persons != 1) throw ValidationError("--multi-person applies to tracking models only");
    fs::path p(data);
    if (fs::is_directory(p)) p /= "glyphs.json";
    const AttentionTask task{glyphs_from_json(read_text(p)), model.glimpse};
    const auto score = evaluate_attention(model.agents.at(0).second, task, task.data.test, max_episodes);
    out << "final_accuracy " << score.final_accuracy << " continuous_return " << score.continuous_return
        << " episodes " << score.episodes << "\n";
    result = attention_score_json(score);
  }
  if (!out_dir.empty()) {
    OutputDir dir(out_dir);
    dir.write("eval.json", result.dump(2) + "\n");
    ojson cfg;
    cfg["checkpoint"] = checkpoint;
    cfg["data"] = data;
    cfg["multi_person"] = persons;
    cfg["episodes"] = max_episodes;
    dir.finish("eval", seed, cfg);
  }
  return kOk;
}

int cmd_baseline(const std::string& kind_name, const RunConfig& c, const std::string& data_dir,
                 const std::string& out_dir, std::ostream& out) {
  const BaselineKind kind = parse_baseline(kind_name);
  c.validate();
  OutputDir dir(out_dir);
  std::ostringstream events;
  EventLog log(&events);
  const auto task = tracking_task(c, data_dir);
  const auto result = run_baseline(kind, task, c.train, c.seed, &log);
  if (!result.curve.empty()) {
    dir.write("curves.csv", curve_to_csv(result.curve));
    dir.write("events.jsonl", events.str());
  }
  dir.write("score.json", tracking_score_json(result.score).dump(2) + "\n");
  ojson cfg = config_object(c);
  cfg["baseline"] = to_string(kind);
  cfg["data"] = data_dir.empty() ? ojson("generated") : ojson(data_dir);
  dir.finish(std::string("baseline ") + to_string(kind), c.seed, cfg);
  out << to_string(kind) << " mean_reward " << result.score.mean_reward << " accuracy "
      << result.score.mean_accuracy << "\n";
  return kOk;
}

int cmd_grad_check(std::size_t trials, std::uint64_t seed, bool sign_flip, std::ostream& out, std::ostream& err) {
  if (trials == 0) throw ValidationError("--trials must be positive");
  GradCheckResult worst;
  std::size_t worst_trial = 0;
  bool all = true;
  for (std::size_t i = 0; i < trials; ++i) {
    const std::uint64_t s = derive_seed(seed, "grad_check", i);
    const auto r = gradient_check(random_spec(s), s, 4, 2, 1e-4, sign_flip);
    all = all && r.passed;
    if (i == 0 || r.max_rel_error > worst.max_rel_error) {
      worst = r;
      worst_trial = i;
    }
  }
  ojson j;
  j["trials"] = trials;
  j["seed"] = seed;
  j["tolerance"] = 1e-4;
  j["max_rel_error"] = worst.max_rel_error;
  j["worst_trial"] = worst_trial;
  j["worst_layer"] = worst.worst_layer;
  j["worst_index"] = worst.worst_index;
  j["passed"] = all;
  out << j.dump() << "\n";
  if (!all) {
    err << "gradient check failed: relative error " << worst.max_rel_error << " at trial " << worst_trial
        << ", layer " << worst.worst_layer << ", index " << worst.worst_index << "\n";
    return kCheckFailed;
  }
  return kOk;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, Task task) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config parse error: ") + e.what());
  }
  RunConfig c = default_run_config(task);
  std::map<std::string, const Field*> index;
  for (const auto& f : schema()) index[std::string(f.section) + "." + f.key] = &f;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ValidationError("config key '" + section + "' must be inside a [section]");
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      const auto it = index.find(name);
      if (it == index.end()) throw ValidationError("unknown config key '" + name + "'");
      it->second->set(c, name, value.data());
    }
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path, Task task) { return parse_run_config(read_text(path), task); }

std::string run_config_to_json(const RunConfig& config) { return config_object(config).dump(2); }

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep anticipatory networks: bounds, data, training and evaluation", "dan"};
  app.require_subcommand(1);

  auto* vb = app.add_subcommand("verify-bounds", "Sweep the prediction-reward bound over the belief simplex");
  std::size_t ny = 2;
  double r_correct = 1.0, r_incorrect = 0.0;
  std::string sampler = "grid:0.01", vb_out;
  std::uint64_t vb_seed = 0;
  vb->add_option("--ny", ny, "Number of classes")->required()->check(CLI::Range(std::size_t{2}, std::size_t{1000}));
  vb->add_option("--r-correct", r_correct, "Reward for a correct prediction");
  vb->add_option("--r-incorrect", r_incorrect, "Reward for an incorrect prediction");
  vb->add_option("--sampler", sampler, "grid:STEP or random:N");
  vb->add_option("--seed", vb_seed, "Seed for the random sampler");
  vb->add_option("--out", vb_out, "Report JSON path");

  auto* gd = app.add_subcommand("gen-data", "Generate a tracking or glyph dataset");
  std::string gd_kind, gd_config, gd_out;
  std::optional<std::uint64_t> gd_seed;
  std::optional<std::size_t> gd_tracks, gd_per_class;
  std::optional<double> gd_noise, gd_miss;
  gd->add_option("kind", gd_kind, "tracking or glyphs")->required();
  gd->add_option("--config", gd_config, "Config file");
  gd->add_option("--seed", gd_seed, "Root seed");
  gd->add_option("--out", gd_out, "Output directory")->required();
  gd->add_option("--tracks", gd_tracks, "Number of tracks");
  gd->add_option("--per-class", gd_per_class, "Glyph instances per class");
  gd->add_option("--noise", gd_noise, "Reading displacement (tracking) or pixel flip (glyphs) probability");
  gd->add_option("--miss", gd_miss, "Tracking miss probability");

  auto* tr = app.add_subcommand("train", "Train DAN agents");
  std::string tr_task, tr_config, tr_out, tr_data, tr_reward, tr_mode;
  std::optional<std::uint64_t> tr_seed;
  std::optional<std::size_t> tr_episodes;
  tr->add_option("task", tr_task, "tracking or attention")->required();
  tr->add_option("--config", tr_config, "Config file");
  tr->add_option("--seed", tr_seed, "Root seed");
  tr->add_option("--out", tr_out, "Output directory")->required();
  tr->add_option("--data", tr_data, "Dataset directory from gen-data (default: generate from the seed)");
  tr->add_option("--reward", tr_reward, "Reward schedule: continuous or terminal");
  tr->add_option("--mode", tr_mode, "Reward mode: dan, dan_plus_coverage or coverage");
  tr->add_option("--episodes", tr_episodes, "Override the number of training episodes");

  auto* ev = app.add_subcommand("eval", "Evaluate a trained model");
  std::string ev_ckpt, ev_data, ev_out;
  std::size_t ev_persons = 1, ev_episodes = 100;
  std::uint64_t ev_seed = 1;
  ev->add_option("--checkpoint", ev_ckpt, "model.json written by train")->required();
  ev->add_option("--data", ev_data, "Tracks (.jsonl or gen-data directory) or glyphs.json")->required();
  ev->add_option("--multi-person", ev_persons, "People tracked at once");
  ev->add_option("--episodes", ev_episodes, "Maximum evaluation episodes");
  ev->add_option("--seed", ev_seed, "Observation noise seed");
  ev->add_option("--out", ev_out, "Optional output directory");

  auto* bl = app.add_subcommand("baseline", "Run a tracking baseline");
  std::string bl_kind, bl_config, bl_out, bl_data;
  std::optional<std::uint64_t> bl_seed;
  std::optional<std::size_t> bl_episodes;
  bl->add_option("kind", bl_kind, "random_policy, coverage or exact_oracle")->required();
  bl->add_option("--config", bl_config, "Config file");
  bl->add_option("--seed", bl_seed, "Root seed");
  bl->add_option("--out", bl_out, "Output directory")->required();
  bl->add_option("--data", bl_data, "Dataset directory from gen-data");
  bl->add_option("--episodes", bl_episodes, "Override the number of training episodes");

  auto* gc = app.add_subcommand("grad-check", "Finite-difference check of backpropagation");
  std::size_t gc_trials = 20;
  std::uint64_t gc_seed = 1;
  bool gc_flip = false;
  gc->add_option("--trials", gc_trials, "Random networks to check");
  gc->add_option("--seed", gc_seed, "Root seed");
  gc->add_flag("--inject-sign-flip", gc_flip)->group("");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front())
      err << sub->help();
    else
      err << app.help();
    return kUsageError;
  }

  try {
    if (vb->parsed()) return cmd_verify_bounds(ny, r_correct, r_incorrect, sampler, vb_seed, vb_out, out, err);
    if (gd->parsed()) {
      const Task task = gd_kind == "glyphs" ? Task::kAttention : Task::kTracking;
      RunConfig c = resolve_config(task, gd_config, gd_seed);
      if (gd_tracks) c.tracks = *gd_tracks;
      if (gd_per_class) c.glyphs_per_class = *gd_per_class;
      if (gd_noise) (task == Task::kTracking ? c.grid.noise_adjacent : c.glyph_noise) = *gd_noise;
      if (gd_miss) c.grid.miss_prob = *gd_miss;
      return cmd_gen_data(gd_kind, c, gd_out, out);
    }
    if (tr->parsed()) {
      RunConfig c = resolve_config(parse_task(tr_task), tr_config, tr_seed);
      if (!tr_reward.empty()) c.train.reward_schedule = parse_reward_schedule(tr_reward);
      if (!tr_mode.empty()) c.train.reward_mode = parse_reward_mode(tr_mode);
      if (tr_episodes) c.train.episodes = *tr_episodes;
      return cmd_train(c, tr_data, tr_out, out);
    }
    if (ev->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_persons, ev_episodes, ev_seed, ev_out, out);
    if (bl->parsed()) {
      RunConfig c = resolve_config(Task::kTracking, bl_config, bl_seed);
      if (bl_episodes) c.train.episodes = *bl_episodes;
      return cmd_baseline(bl_kind, c, bl_data, bl_out, out);
    }
    if (gc->parsed()) return cmd_grad_check(gc_trials, gc_seed, gc_flip, out, err);
  } catch (const ApplicabilityError& e) {
    err << "error: bound not applicable: " << e.what() << "\n";
    return kUsageError;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const IdxFormatError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace dan::cli
