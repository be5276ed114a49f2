// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// if any criterion fails. Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cli.hpp"
#include "dan/attention_env.hpp"
#include "dan/baselines.hpp"
#include "dan/belief_engine.hpp"
#include "dan/convex_bounds.hpp"
#include "dan/errors.hpp"
#include "dan/stats.hpp"
#include "dan/trainer.hpp"
#include "idx_fixture.hpp"
#include "test_models.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace dan {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  Timer() : t0_(std::chrono::steady_clock::now()) {}
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult cli_run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

/// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads.
template <typename T>
std::vector<T> parallel_map(std::size_t n, const std::function<T(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  std::vector<T> out(n);
  std::size_t next = 0;
  while (next < n) {
    std::vector<std::future<void>> batch;
    for (std::size_t w = 0; w < workers && next < n; ++w, ++next)
      batch.push_back(std::async(std::launch::async, [&, i = next] { out[i] = fn(i); }));
    for (auto& f : batch) f.get();
  }
  return out;
}

std::string sampler_for(std::size_t ny) { return ny <= 3 ? "grid:0.01" : "random:100000"; }

// 1 -------------------------------------------------------------------------
Outcome corollary_bound() {
  Outcome o{true, ""};
  double worst_gap = 0.0, slowest = 0.0;
  for (std::size_t ny = 2; ny <= 10; ++ny) {
    Timer t;
    const auto r = cli_run({"verify-bounds", "--ny", std::to_string(ny), "--r-correct", "1", "--r-incorrect", "0",
                            "--sampler", sampler_for(ny), "--seed", "7"});
    const double secs = t.seconds();
    slowest = std::max(slowest, secs);
    if (r.code != 0) return {false, "verify-bounds exit " + std::to_string(r.code) + " for n_y=" + std::to_string(ny)};
    const auto j = json::parse(r.out);
    const double expected = -1.0 + std::log(std::exp(1.0) + static_cast<double>(ny) - 1.0);
    const double gap = std::max(std::abs(j.at("theorem_bound").get<double>() - expected),
                                std::abs(j.at("max_error").get<double>() - expected));
    worst_gap = std::max(worst_gap, gap);
    if (gap > 1e-9 || secs >= 10.0) o.pass = false;
  }
  o.detail = "n_y=2..10: max |bound - (-1+ln(e+n_y-1))|, |max_error - bound| = " + fmt("%.3g", worst_gap) +
             " (tol 1e-9); slowest setting " + fmt("%.2f", slowest) + " s (limit 10 s)";
  return o;
}

// 2 -------------------------------------------------------------------------
Outcome general_theorem() {
  const std::vector<std::pair<double, double>> rewards{{1, 0}, {2, 0}, {2, 1}, {3, 1}};
  std::size_t settings = 0;
  double worst_slack = std::numeric_limits<double>::infinity(), lowest = 0.0;
  for (const auto& [rc, ri] : rewards)
    for (std::size_t ny = 2; ny <= 10; ++ny) {
      if (rc - ri > static_cast<double>(ny)) continue;
      const PredictionRewardSpec spec{rc, ri, ny};
      const auto report = verify_bound_sweep(spec, parse_sampler(sampler_for(ny), 7));
      ++settings;
      if (!report.holds) return {false, "sweep violated at r'=" + fmt("%g", rc) + " r''=" + fmt("%g", ri) +
                                            " n_y=" + std::to_string(ny)};
      worst_slack = std::min(worst_slack, report.theorem_bound - report.max_error);
      lowest = std::min(lowest, report.min_error);
    }
  const bool pass = worst_slack >= -1e-9 && lowest >= -1e-9;
  return {pass, std::to_string(settings) + " settings; min(bound - max_error) = " + fmt("%.3g", worst_slack) +
                    ", min error = " + fmt("%.3g", lowest) + " (tol 1e-9)"};
}

// 3 -------------------------------------------------------------------------
Outcome tangency() {
  Rng rng(derive_seed(3, "tangency"));
  double worst_identity = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + rng.uniform_int(9);
    std::vector<double> r(n);
    for (auto& v : r) v = 3.0 * rng.normal();
    const Belief s(softmax(r));
    worst_identity = std::max(worst_identity, std::abs(-entropy(s) - tangent_value(s, r)));
  }
  double worst_closed = 0.0;
  for (std::size_t ny = 2; ny <= 10; ++ny) {
    const PredictionRewardSpec spec{1.0, 0.0, ny};
    const auto family = reward_vectors_01(spec);
    for (int i = 0; i < 10000; ++i) {
      const Belief b(rng.dirichlet_uniform(ny));
      worst_closed = std::max(worst_closed,
                              std::abs(closed_form_01_bound(b, spec) - prediction_lower_bound(b, family).value));
    }
  }
  return {worst_identity <= 1e-9 && worst_closed <= 1e-12,
          "max |-H(softmax r) - tangent| = " + fmt("%.3g", worst_identity) + " (tol 1e-9); max |closed form - enumeration| = " +
              fmt("%.3g", worst_closed) + " (tol 1e-12)"};
}

// 4 -------------------------------------------------------------------------
Outcome filter_equivalence() {
  Rng rng(derive_seed(4, "filter"));
  double worst_post = 0.0, min_ig = std::numeric_limits<double>::infinity();
  double min_gap = std::numeric_limits<double>::infinity(), max_excess = -std::numeric_limits<double>::infinity();
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 2 + rng.uniform_int(7);
    const std::size_t n_actions = 1 + rng.uniform_int(3), n_obs = 2 + rng.uniform_int(4);
    const auto m = testing::random_model(rng, n, n_actions, n_obs);
    const Belief prior(rng.dirichlet_uniform(n));
    const std::size_t len = 1 + rng.uniform_int(5);
    std::vector<ActionObservation> history;
    Belief b = prior;
    for (std::size_t t = 0; t < len; ++t) {
      const std::size_t a = rng.uniform_int(n_actions);
      const auto dist = observation_distribution(predict(b, m), a, m);
      const std::size_t z = rng.categorical(dist);
      history.push_back({a, z});
      b = bayes_update(b, a, z, m);
      for (std::size_t act = 0; act < n_actions; ++act) min_ig = std::min(min_ig, expected_info_gain(b, act, m));
    }
    const Belief brute = brute_force_posterior(history, prior, m);
    for (std::size_t i = 0; i < n; ++i) worst_post = std::max(worst_post, std::abs(brute[i] - b[i]));

    const PredictionRewardSpec spec{1.0, 0.0, n};
    const double bound = theorem_bound(spec);
    for (std::size_t act = 0; act < n_actions; ++act) {
      min_ig = std::min(min_ig, expected_info_gain(prior, act, m));
      const double gap = expected_bound_gap(prior, act, m, spec);
      min_gap = std::min(min_gap, gap);
      max_excess = std::max(max_excess, gap - bound);
    }
  }
  const bool pass = worst_post <= 1e-9 && min_ig >= -1e-9 && min_gap >= 0.0 && max_excess <= 0.0;
  return {pass, "max |filter - brute force| = " + fmt("%.3g", worst_post) + " (tol 1e-9); min info gain = " +
                    fmt("%.3g", min_ig) + "; coherence gap in [" + fmt("%.4f", min_gap) + ", bound " +
                    fmt("%+.4f", max_excess) + "]"};
}

// 5 -------------------------------------------------------------------------
Outcome particle_convergence() {
  const auto m = testing::two_state_sensor();
  const Belief exact = bayes_update(Belief::uniform(2), 0, 1, m);
  std::vector<double> tv;
  for (std::size_t count : {50u, 200u, 800u, 3200u}) {
    double sum = 0.0;
    for (std::size_t s = 0; s < 100; ++s) {
      Rng rng(derive_seed(5, "particles", s));
      auto p = ParticleSet::sample(Belief::uniform(2), count, rng);
      p = particle_filter_step(p, 0, 1, m, rng);
      sum += tv_distance(p.to_belief(2), exact);
    }
    tv.push_back(sum / 100.0);
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < tv.size(); ++i) decreasing = decreasing && tv[i] < tv[i - 1];
  return {decreasing, "mean TV at 50/200/800/3200 particles: " + fmt("%.4f", tv[0]) + " " + fmt("%.4f", tv[1]) + " " +
                          fmt("%.4f", tv[2]) + " " + fmt("%.4f", tv[3])};
}

// 6 -------------------------------------------------------------------------
Outcome gradient_checks() {
  Timer t;
  const auto r = cli_run({"grad-check", "--trials", "20", "--seed", "1"});
  const double secs = t.seconds();
  if (r.code != 0) return {false, "grad-check exit " + std::to_string(r.code) + ": " + r.err};
  const auto j = json::parse(r.out);
  const double rel = j.at("max_rel_error").get<double>();
  const auto flipped = cli_run({"grad-check", "--trials", "1", "--inject-sign-flip"});
  const bool pass = rel <= 1e-4 && secs < 30.0 && flipped.code == 2;
  return {pass, "20 networks, max relative error " + fmt("%.3g", rel) + " (tol 1e-4) in " + fmt("%.2f", secs) +
                    " s (limit 30 s); sign-flip injection exit " + std::to_string(flipped.code)};
}

// 7 -------------------------------------------------------------------------
cli::RunConfig config_file(const char* name, cli::Task task) {
  return cli::load_run_config((fs::path(DAN_SOURCE_DIR) / "configs" / name).string(), task);
}

Outcome dan_learns() {
  const auto cfg = config_file("desk.cfg", cli::Task::kTracking);
  const std::size_t seeds = 10;
  Timer t;
  enum { kDan, kDanCov, kCoverage, kRandom, kArms };
  const auto scores = parallel_map<double>(seeds * kArms, [&](std::size_t job) {
    const std::uint64_t seed = job / kArms + 1;
    const auto cams = default_camera_layout(cfg.grid);
    const TrackingTask task{cfg.grid, cams, generate_dataset(cfg.grid, cams, cfg.tracks, derive_seed(seed, "data"))};
    TrainConfig c = cfg.train;
    switch (job % kArms) {
      case kDan: return train_tracking(task, c, seed).final_score.mean_reward;
      case kDanCov:
        c.reward_mode = RewardMode::kDanPlusCoverage;
        return train_tracking(task, c, seed).final_score.mean_reward;
      case kCoverage: return run_baseline(BaselineKind::kCoverage, task, c, seed).score.mean_reward;
      default: return run_baseline(BaselineKind::kRandomPolicy, task, c, seed).score.mean_reward;
    }
  });
  const double minutes = t.seconds() / 60.0;
  std::vector<double> arm[kArms];
  for (std::size_t j = 0; j < scores.size(); ++j) arm[j % kArms].push_back(scores[j]);
  const double dan = mean(arm[kDan]), dpc = mean(arm[kDanCov]), cov = mean(arm[kCoverage]), rnd = mean(arm[kRandom]);
  const double p_random = permutation_p_value(arm[kDan], arm[kRandom]);
  const double p_coverage = permutation_p_value(arm[kDan], arm[kCoverage]);
  const bool pass = dan >= dpc && dpc > rnd && dan >= 1.5 * rnd && cov < dan && p_random < 0.05 && minutes < 30.0;
  return {pass, "mean eval reward over 10 seeds: DAN " + fmt("%.3f", dan) + ", DAN+coverage " + fmt("%.3f", dpc) +
                    ", coverage " + fmt("%.3f", cov) + ", random " + fmt("%.3f", rnd) + "; DAN/random " +
                    fmt("%.3f", dan / rnd) + " (need >= 1.5); p(DAN>random) " + fmt("%.2g", p_random) +
                    ", p(DAN>coverage) " + fmt("%.2g", p_coverage) + "; " + fmt("%.1f", minutes) + " min"};
}

// 8 -------------------------------------------------------------------------
Outcome continuous_vs_terminal() {
  const auto cfg = config_file("glyphs.cfg", cli::Task::kAttention);
  const std::size_t seeds = 10;
  struct Result {
    double to80 = 0.0;
    double continuous_return = 0.0;
  };
  const auto runs = parallel_map<Result>(seeds * 2, [&](std::size_t job) {
    const std::uint64_t seed = job / 2 + 1;
    const AttentionTask task{make_glyph_dataset(derive_seed(seed, "data"), cfg.glyphs_per_class, cfg.glyph_noise),
                             cfg.glimpse};
    TrainConfig c = cfg.train;
    c.reward_schedule = job % 2 == 0 ? RewardSchedule::kContinuous : RewardSchedule::kTerminal;
    const auto run = train_attention(task, c, seed);
    const std::size_t e = episodes_to_accuracy(run.curve, 0.8);
    return Result{e == 0 ? std::numeric_limits<double>::infinity() : static_cast<double>(e),
                  run.final_score.continuous_return};
  });
  std::vector<double> cont_to80, term_to80, cont_ret, term_ret;
  for (std::size_t j = 0; j < runs.size(); ++j) {
    (j % 2 == 0 ? cont_to80 : term_to80).push_back(runs[j].to80);
    (j % 2 == 0 ? cont_ret : term_ret).push_back(runs[j].continuous_return);
  }
  const double mc = median(cont_to80), mt = median(term_to80);
  const double rc = mean(cont_ret), rt = mean(term_ret);
  return {mc < mt && rt < rc, "median episodes to 80% accuracy: continuous " + fmt("%g", mc) + ", terminal " +
                                  fmt("%g", mt) + "; continuous-reward evaluation return: continuous-trained " +
                                  fmt("%.3f", rc) + ", terminal-trained " + fmt("%.3f", rt)};
}

// 9 -------------------------------------------------------------------------
std::vector<std::pair<std::string, std::string>> dir_contents(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    out.emplace_back(fs::relative(e.path(), dir).string(), s.str());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "dan_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  {
    std::ofstream cfg(root / "small_tracking.cfg");
    cfg << "[grid]\ntracks = 60\n[train]\nepisodes = 60\nwarmup_steps = 120\neval_every = 30\neval_items = 10\n";
    std::ofstream att(root / "small_glyphs.cfg");
    att << "[glyphs]\nper_class = 6\n[train]\nepisodes = 40\nwarmup_steps = 24\neval_every = 20\neval_items = 10\n";
  }
  const std::string tc = (root / "small_tracking.cfg").string(), ac = (root / "small_glyphs.cfg").string();
  std::size_t compared = 0;
  for (int rep = 0; rep < 2; ++rep) {
    const fs::path d = root / ("rep" + std::to_string(rep));
    const std::vector<std::vector<std::string>> commands{
        {"verify-bounds", "--ny", "5", "--sampler", "random:100000", "--seed", "7", "--out", (d / "bounds.json").string()},
        {"gen-data", "tracking", "--config", tc, "--seed", "3", "--out", (d / "tracks").string()},
        {"gen-data", "glyphs", "--config", ac, "--seed", "3", "--noise", "0.05", "--out", (d / "glyphs").string()},
        {"train", "tracking", "--config", tc, "--seed", "3", "--data", (d / "tracks").string(), "--out",
         (d / "train_tracking").string()},
        {"train", "attention", "--config", ac, "--seed", "3", "--out", (d / "train_attention").string()},
        {"eval", "--checkpoint", (d / "train_tracking" / "model.json").string(), "--data", (d / "tracks").string(),
         "--multi-person", "3", "--episodes", "10", "--out", (d / "eval").string()},
        {"baseline", "random_policy", "--config", tc, "--seed", "3", "--data", (d / "tracks").string(), "--out",
         (d / "baseline").string()},
    };
    for (const auto& c : commands) {
      const auto r = cli_run(c);
      if (r.code != 0) return {false, c[0] + " exited " + std::to_string(r.code) + ": " + r.err};
    }
  }
  auto a = dir_contents(root / "rep0");
  auto b = dir_contents(root / "rep1");
  // Paths inside manifests name the run directory; compare with it masked.
  auto mask = [&](auto& files, const std::string& dir) {
    for (auto& [name, body] : files)
      for (std::size_t pos; (pos = body.find(dir)) != std::string::npos;) body.replace(pos, dir.size(), "<run>");
  };
  mask(a, (root / "rep0").string());
  mask(b, (root / "rep1").string());
  if (a.size() != b.size()) return {false, "different file sets"};
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) return {false, "files differ: " + a[i].first};
    ++compared;
  }
  fs::remove_all(root);
  return {compared > 0, std::to_string(compared) + " CSV/JSON/IDX outputs byte-identical across repeated runs"};
}

// 10 ------------------------------------------------------------------------
Outcome idx_loader() {
  const fs::path dir = fs::temp_directory_path() / "dan_acceptance_idx";
  fs::create_directories(dir);
  auto write = [&](const char* name, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(dir / name, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    return (dir / name).string();
  };
  const auto img = testing::fixture_image_bytes();
  const auto lab = testing::fixture_label_bytes();
  const auto set = load_idx(write("img", img), write("lab", lab));
  bool ok = set.size() == 3 && set.rows == 28 && set.cols == 28 && set.labels == std::vector<int>{7, 2, 9};
  write_idx(set, (dir / "img2").string(), (dir / "lab2").string());
  ok = ok && encode_idx_images(set) == img && encode_idx_labels(set) == lab &&
       load_idx((dir / "img2").string(), (dir / "lab2").string()) == set;

  using Failure = std::pair<int, std::size_t>;  // code, byte offset
  auto failure_of = [&](std::vector<std::uint8_t> i, std::vector<std::uint8_t> l) -> Failure {
    try {
      load_idx(write("bad_img", i), write("bad_lab", l));
    } catch (const IdxFormatError& e) {
      return {static_cast<int>(e.code()), e.offset()};
    }
    return {-1, 0};
  };
  auto bad_magic = img;
  bad_magic[2] = 0x09;
  auto short_labels = lab;
  short_labels[7] = 2;
  short_labels.pop_back();
  auto truncated = img;
  truncated.resize(img.size() - 1);
  const auto magic = failure_of(bad_magic, lab), count = failure_of(img, short_labels),
             trunc = failure_of(truncated, lab);
  fs::remove_all(dir);
  ok = ok && magic == Failure{static_cast<int>(IdxErrorCode::kBadMagic), 0} &&
       count.first == static_cast<int>(IdxErrorCode::kCountMismatch) &&
       trunc.first == static_cast<int>(IdxErrorCode::kTruncated);
  return {ok, "3-image fixture round-trips bit-exactly; bad magic -> code " + std::to_string(magic.first) +
                  " at offset " + std::to_string(magic.second) + ", count mismatch -> code " +
                  std::to_string(count.first) + ", truncated -> code " + std::to_string(trunc.first) +
                  " at offset " + std::to_string(trunc.second)};
}

}  // namespace
}  // namespace dan

int main(int argc, char** argv) {
  using namespace dan;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"corollary bound reproduction", corollary_bound},
      {"general theorem sweep", general_theorem},
      {"tangency identity and closed form", tangency},
      {"filter/oracle equivalence", filter_equivalence},
      {"particle filter convergence", particle_convergence},
      {"gradient checks", gradient_checks},
      {"DAN learns on desk tracking", dan_learns},
      {"continuous vs terminal reward", continuous_vs_terminal},
      {"determinism", determinism},
      {"IDX loader", idx_loader},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
