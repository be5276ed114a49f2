#include "dan/convex_bounds.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>

#include <json.hpp>

#include "dan/errors.hpp"
#include "dan/rng.hpp"

namespace dan {

Belief::Belief(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.size() < 2) throw ValidationError("belief needs at least 2 entries");
  double sum = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0))
      throw ValidationError("belief entry outside [0, 1]: " + std::to_string(p));
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance)
    throw ValidationError("belief entries sum to " + std::to_string(sum) + ", not 1");
}

Belief Belief::normalized(std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("negative or non-finite weight");
    sum += w;
  }
  if (!(sum > 0.0)) throw ValidationError("cannot normalize an all-zero weight vector");
  for (auto& w : weights) w /= sum;
  return Belief(std::move(weights));
}

Belief Belief::uniform(std::size_t n) {
  return Belief(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Belief Belief::vertex(std::size_t n, std::size_t index) {
  if (index >= n) throw ValidationError("vertex index out of range");
  std::vector<double> p(n, 0.0);
  p[index] = 1.0;
  return Belief(std::move(p));
}

std::size_t Belief::argmax() const noexcept {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

void PredictionRewardSpec::validate() const {
  if (n_y < 2) throw ValidationError("n_y must be at least 2");
  if (!std::isfinite(r_correct) || !std::isfinite(r_incorrect))
    throw ValidationError("rewards must be finite");
  if (r_correct < r_incorrect)
    throw ValidationError("r_correct must be >= r_incorrect (margin m = r' - r'' < 0)");
}

bool PredictionRewardSpec::bound_applies() const noexcept {
  const double m = margin();
  return m >= 1.0 && m <= static_cast<double>(n_y);
}

RewardVectorFamily::RewardVectorFamily(std::vector<RewardVector> vectors) : vectors_(std::move(vectors)) {
  if (vectors_.empty()) throw ValidationError("reward vector family is empty");
  dim_ = vectors_.front().rewards.size();
  std::set<int> labels;
  for (const auto& v : vectors_) {
    if (v.rewards.size() != dim_) throw ValidationError("reward vectors differ in length");
    if (!labels.insert(v.label).second)
      throw ValidationError("duplicate reward vector label " + std::to_string(v.label));
  }
}

double entropy(const Belief& b) {
  double h = 0.0;
  for (double p : b.probs())
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) throw ValidationError("log_sum_exp of an empty vector");
  const double m = *std::max_element(x.begin(), x.end());
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> x) {
  const double z = log_sum_exp(x);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i] - z);
  return out;
}

RewardVectorFamily reward_vectors_01(const PredictionRewardSpec& spec) {
  spec.validate();
  std::vector<RewardVector> vs;
  vs.reserve(spec.n_y);
  for (std::size_t j = 0; j < spec.n_y; ++j) {
    RewardVector v{static_cast<int>(j) + 1, std::vector<double>(spec.n_y, spec.r_incorrect)};
    v.rewards[j] = spec.r_correct;
    vs.push_back(std::move(v));
  }
  return RewardVectorFamily(std::move(vs));
}

RewardVectorFamily abstain_family(std::size_t n_y, double value, int label) {
  return RewardVectorFamily({RewardVector{label, std::vector<double>(n_y, value)}});
}

double tangent_value(const Belief& b, std::span<const double> r) {
  if (r.size() != b.size()) throw ValidationError("reward vector length does not match belief");
  double dot = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) dot += b[i] * r[i];
  return dot - log_sum_exp(r);
}

TangentChoice prediction_lower_bound(const Belief& b, const RewardVectorFamily& family) {
  TangentChoice best{-std::numeric_limits<double>::infinity(), 0};
  bool first = true;
  for (const auto& v : family.vectors()) {
    const double t = tangent_value(b, v.rewards);
    if (first || t > best.value || (t == best.value && v.label < best.label)) {
      best = {t, v.label};
      first = false;
    }
  }
  return best;
}

namespace {
double conjugate_01(const PredictionRewardSpec& spec) {
  // ln(e^{r'} + (n_y - 1) e^{r''}), evaluated as a two-term log-sum-exp.
  const double terms[2] = {spec.r_correct,
                           spec.r_incorrect + std::log(static_cast<double>(spec.n_y - 1))};
  return log_sum_exp(terms);
}
}  // namespace

double closed_form_01_bound(const Belief& b, const PredictionRewardSpec& spec) {
  spec.validate();
  if (b.size() != spec.n_y) throw ValidationError("belief length does not match n_y");
  return spec.margin() * b.max() + spec.r_incorrect - conjugate_01(spec);
}

double approximation_error_01(const Belief& b, const PredictionRewardSpec& spec) {
  return -entropy(b) - closed_form_01_bound(b, spec);
}

double theorem_bound(const PredictionRewardSpec& spec) {
  spec.validate();
  if (!spec.bound_applies())
    throw ApplicabilityError("tangent bound requires 1 <= m <= n_y; got m = " +
                             std::to_string(spec.margin()) + ", n_y = " + std::to_string(spec.n_y));
  const double m = spec.margin();
  const double n = static_cast<double>(spec.n_y);
  const double eps1 = std::log(1.0 / m) - 1.0;
  const double eps2 = std::log(1.0 / n) - m / n;
  return std::max(eps1, eps2) - spec.r_incorrect + conjugate_01(spec);
}

double multi_tangent_bound(const Belief& b, std::span<const RewardVectorFamily> families) {
  if (families.empty()) throw ValidationError("multi_tangent_bound needs at least one family");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& f : families) {
    if (f.dimension() != b.size()) throw ValidationError("family dimension does not match belief");
    best = std::max(best, prediction_lower_bound(b, f).value);
  }
  return best;
}

Sampler parse_sampler(std::string_view text, std::uint64_t seed) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ValidationError("sampler must be grid:STEP or random:N");
  const auto kind = text.substr(0, colon);
  const std::string arg(text.substr(colon + 1));
  try {
    std::size_t used = 0;
    if (kind == "grid") {
      const double step = std::stod(arg, &used);
      if (used != arg.size() || !(step > 0.0) || step > 1.0)
        throw ValidationError("grid step must be in (0, 1]");
      return GridSampler{step};
    }
    if (kind == "random") {
      const long long n = std::stoll(arg, &used);
      if (used != arg.size() || n <= 0) throw ValidationError("random sample count must be positive");
      return RandomSampler{static_cast<std::size_t>(n), seed};
    }
  } catch (const std::logic_error& e) {
    if (dynamic_cast<const ValidationError*>(&e)) throw;
    throw ValidationError("malformed sampler argument '" + arg + "'");
  }
  throw ValidationError("unknown sampler '" + std::string(kind) + "'");
}

std::vector<Belief> k_uniform_beliefs(std::size_t n_y) {
  std::vector<Belief> out;
  for (std::size_t k = 1; k <= n_y; ++k) {
    std::vector<double> p(n_y, 0.0);
    for (std::size_t i = 0; i < k; ++i) p[i] = 1.0 / static_cast<double>(k);
    out.push_back(Belief::normalized(std::move(p)));
  }
  return out;
}

BoundReport verify_bound_sweep(const PredictionRewardSpec& spec, const Sampler& sampler) {
  BoundReport report;
  report.spec = spec;
  report.theorem_bound = theorem_bound(spec);
  report.max_error = -std::numeric_limits<double>::infinity();
  report.min_error = std::numeric_limits<double>::infinity();

  auto check = [&](const Belief& b) {
    const double err = approximation_error_01(b, spec);
    ++report.samples_checked;
    report.min_error = std::min(report.min_error, err);
    if (err > report.max_error) {
      report.max_error = err;
      report.argmax_belief = b.values();
    }
  };

  if (const auto* grid = std::get_if<GridSampler>(&sampler)) {
    const double steps = 1.0 / grid->step;
    const auto resolution = static_cast<std::size_t>(std::llround(steps));
    if (resolution == 0 || std::abs(steps - static_cast<double>(resolution)) > 1e-6)
      throw ValidationError("grid step must divide 1");
    for_each_grid_belief(spec.n_y, resolution, check);
  } else {
    const auto& rnd = std::get<RandomSampler>(sampler);
    for (const auto& b : k_uniform_beliefs(spec.n_y)) check(b);
    Rng rng(derive_seed(rnd.seed, "verify_bound_sweep"));
    for (std::size_t i = 0; i < rnd.n; ++i) check(Belief(rng.dirichlet_uniform(spec.n_y)));
  }

  report.holds = report.min_error >= -1e-9 && report.max_error <= report.theorem_bound + 1e-9;
  return report;
}

std::string to_json(const BoundReport& report) {
  nlohmann::ordered_json j;
  j["n_y"] = report.spec.n_y;
  j["r_correct"] = report.spec.r_correct;
  j["r_incorrect"] = report.spec.r_incorrect;
  j["theorem_bound"] = report.theorem_bound;
  j["max_error"] = report.max_error;
  j["argmax_belief"] = report.argmax_belief;
  j["holds"] = report.holds;
  j["samples_checked"] = report.samples_checked;
  return j.dump(2) + "\n";
}

}  // namespace dan
