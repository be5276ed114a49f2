#include "dan/tracking_env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "dan/errors.hpp"

namespace dan {

void GridConfig::validate() const {
  if (width < 2 || height < 2) throw ValidationError("grid must be at least 2x2");
  if (n_cameras < 1) throw ValidationError("need at least one camera");
  if (episode_len < 1) throw ValidationError("episode_len must be at least 1");
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError(std::string(name) + " must be in [0, 1]");
  };
  prob(walk_persistence, "walk_persistence");
  prob(noise_adjacent, "noise_adjacent");
  prob(miss_prob, "miss_prob");
}

void validate_layout(const GridConfig& config, std::span<const CameraSpec> cameras) {
  if (cameras.empty()) throw ValidationError("camera layout is empty");
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const auto& c = cameras[i];
    if (c.id != static_cast<int>(i)) throw ValidationError("camera ids must be 0..n-1 in order");
    if (c.x0 < 0 || c.y0 < 0 || c.x1 >= config.width || c.y1 >= config.height || c.x0 > c.x1 || c.y0 > c.y1)
      throw ValidationError("camera " + std::to_string(c.id) + " rectangle leaves the grid");
  }
}

namespace {

struct Span1 {
  int lo, hi;
};

// Overlapping intervals over a centred block of about sqrt(0.7) of the axis.
std::vector<Span1> axis_tiles(int size, int tiles) {
  int covered = static_cast<int>(std::lround(size * std::sqrt(0.7)));
  covered = std::clamp(covered, std::min(tiles, size), size);
  const int margin = (size - covered) / 2;
  std::vector<Span1> out;
  for (int i = 0; i < tiles; ++i) {
    int lo = margin + i * covered / tiles - (i > 0 ? 1 : 0);
    int hi = margin + (i + 1) * covered / tiles - 1 + (i + 1 < tiles ? 1 : 0);
    lo = std::clamp(lo, 0, size - 1);
    hi = std::clamp(hi, lo, size - 1);
    out.push_back({lo, hi});
  }
  return out;
}

Cell clamp_cell(Cell c, const GridConfig& config) {
  return {std::clamp(c.x, 0, config.width - 1), std::clamp(c.y, 0, config.height - 1)};
}

}  // namespace

std::vector<CameraSpec> default_camera_layout(const GridConfig& config) {
  config.validate();
  const int gx = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(config.n_cameras))));
  const int gy = (config.n_cameras + gx - 1) / gx;
  const auto xs = axis_tiles(config.width, gx);
  const auto ys = axis_tiles(config.height, gy);
  std::vector<CameraSpec> cams;
  for (int k = 0; k < config.n_cameras; ++k) {
    const auto& sx = xs[static_cast<std::size_t>(k % gx)];
    const auto& sy = ys[static_cast<std::size_t>(k / gx)];
    cams.push_back({k, sx.lo, sy.lo, sx.hi, sy.hi});
  }
  return cams;
}

Track walk_track(const GridConfig& config, Cell start, std::optional<Move> first_move, Rng& rng, std::size_t id) {
  Track track{id, {}};
  track.positions.reserve(static_cast<std::size_t>(config.episode_len));
  Cell pos = clamp_cell(start, config);
  track.positions.push_back(pos);
  std::optional<Move> prev;
  for (int t = 1; t < config.episode_len; ++t) {
    Move m;
    if (t == 1 && first_move) {
      m = *first_move;
    } else if (prev && rng.bernoulli(config.walk_persistence)) {
      m = *prev;
    } else {
      m.dx = static_cast<int>(rng.uniform_int(3)) - 1;
      m.dy = static_cast<int>(rng.uniform_int(3)) - 1;
    }
    pos = clamp_cell({pos.x + m.dx, pos.y + m.dy}, config);
    track.positions.push_back(pos);
    prev = m;
  }
  return track;
}

TrackDataset generate_dataset(const GridConfig& config, std::span<const CameraSpec> cameras, std::size_t n_tracks,
                              std::uint64_t seed) {
  config.validate();
  validate_layout(config, cameras);
  if (n_tracks < 2) throw ValidationError("need at least 2 tracks");
  const std::size_t n_train = n_tracks * 4 / 5;
  TrackDataset ds;
  for (std::size_t i = 0; i < n_tracks; ++i) {
    Rng rng(derive_seed(seed, "track", i));
    const Cell start{static_cast<int>(rng.uniform_int(static_cast<std::size_t>(config.width))),
                     static_cast<int>(rng.uniform_int(static_cast<std::size_t>(config.height)))};
    auto track = walk_track(config, start, std::nullopt, rng, i);
    (i < n_train ? ds.train : ds.test).push_back(std::move(track));
  }
  return ds;
}

EnvObservation observe(const GridConfig& config, const CameraSpec& camera, Cell pos, Rng& rng) {
  EnvObservation obs{camera.id, std::nullopt, std::nullopt};
  if (!camera.covers(pos)) return obs;
  if (rng.bernoulli(config.miss_prob)) return obs;
  Cell reading = pos;
  if (rng.bernoulli(config.noise_adjacent)) {
    Cell candidates[8];
    std::size_t n = 0;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const Cell c{pos.x + dx, pos.y + dy};
        if ((dx != 0 || dy != 0) && camera.covers(c)) candidates[n++] = c;
      }
    if (n > 0) reading = candidates[rng.uniform_int(n)];
  }
  obs.reading_x = reading.x;
  obs.reading_y = reading.y;
  return obs;
}

TrackingEpisode::TrackingEpisode(GridConfig config, std::vector<CameraSpec> cameras, Track track, Rng rng)
    : config_(config), cameras_(std::move(cameras)), track_(std::move(track)), rng_(rng) {}

TrackingStep TrackingEpisode::step(std::size_t camera) {
  if (done()) throw StateError("tracking episode already ended");
  if (camera >= cameras_.size()) throw ValidationError("camera index out of range");
  const Cell truth = track_.positions[t_++];
  return {observe(config_, cameras_[camera], truth, rng_), truth};
}

MultiPersonEpisode::MultiPersonEpisode(GridConfig config, std::vector<CameraSpec> cameras, std::vector<Track> tracks,
                                       Rng rng)
    : config_(config), cameras_(std::move(cameras)), tracks_(std::move(tracks)), rng_(rng) {
  if (tracks_.empty()) throw ValidationError("multi-person episode needs at least one track");
  length_ = tracks_.front().positions.size();
  for (const auto& t : tracks_)
    if (t.positions.size() != length_) throw ValidationError("tracks have mismatched lengths");
}

MultiPersonStep MultiPersonEpisode::step(std::size_t camera) {
  if (done()) throw StateError("multi-person episode already ended");
  if (camera >= cameras_.size()) throw ValidationError("camera index out of range");
  MultiPersonStep out;
  for (const auto& t : tracks_) {
    const Cell truth = t.positions[t_];
    out.obs.push_back(observe(config_, cameras_[camera], truth, rng_));
    out.truth.push_back(truth);
  }
  ++t_;
  return out;
}

int axis_size(const GridConfig& config, Axis axis) { return axis == Axis::kX ? config.width : config.height; }

int coordinate(Cell c, Axis axis) { return axis == Axis::kX ? c.x : c.y; }

std::size_t encode_reading(const EnvObservation& obs, Axis axis, const GridConfig& config) {
  const auto& r = axis == Axis::kX ? obs.reading_x : obs.reading_y;
  return r ? static_cast<std::size_t>(*r) : static_cast<std::size_t>(axis_size(config, axis));
}

DiscreteModel factored_model(const GridConfig& config, std::span<const CameraSpec> cameras, Axis axis) {
  config.validate();
  validate_layout(config, cameras);
  const int n = axis_size(config, axis);
  const int other = axis_size(config, axis == Axis::kX ? Axis::kY : Axis::kX);

  DiscreteModel model;
  model.transition = Eigen::MatrixXd::Zero(n, n);
  for (int x = 0; x < n; ++x)
    for (int d = -1; d <= 1; ++d) model.transition(std::clamp(x + d, 0, n - 1), x) += 1.0 / 3.0;

  const double w_other = 1.0 / other;
  for (const auto& cam : cameras) {
    Eigen::MatrixXd o = Eigen::MatrixXd::Zero(n + 1, n);
    for (int v = 0; v < n; ++v) {
      for (int u = 0; u < other; ++u) {
        const Cell pos = axis == Axis::kX ? Cell{v, u} : Cell{u, v};
        if (!cam.covers(pos)) {
          o(n, v) += w_other;
          continue;
        }
        o(n, v) += w_other * config.miss_prob;
        const double seen = w_other * (1.0 - config.miss_prob);
        std::vector<int> neighbours;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const Cell c{pos.x + dx, pos.y + dy};
            if ((dx != 0 || dy != 0) && cam.covers(c)) neighbours.push_back(coordinate(c, axis));
          }
        if (neighbours.empty()) {
          o(v, v) += seen;
        } else {
          o(v, v) += seen * (1.0 - config.noise_adjacent);
          const double each = seen * config.noise_adjacent / static_cast<double>(neighbours.size());
          for (int r : neighbours) o(r, v) += each;
        }
      }
    }
    model.observations.push_back(std::move(o));
  }
  model.validate();
  return model;
}

double coverage_reward(const EnvObservation& obs, bool prediction_correct, RewardMode mode) {
  switch (mode) {
    case RewardMode::kCoverage:
      return obs.is_null() ? 0.0 : 1.0;
    case RewardMode::kDanPlusCoverage:
      if (prediction_correct) return 1.0;
      return obs.is_null() ? 0.0 : 0.2;
    case RewardMode::kDan:
      return prediction_correct ? 1.0 : 0.0;
  }
  return 0.0;
}

std::string tracks_to_jsonl(std::span<const Track> tracks) {
  std::string out;
  for (const auto& t : tracks) {
    nlohmann::ordered_json j;
    j["track_id"] = t.id;
    auto pos = nlohmann::json::array();
    for (const auto& c : t.positions) pos.push_back({c.x, c.y});
    j["positions"] = pos;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Track> tracks_from_jsonl(const std::string& text) {
  std::vector<Track> out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Track t;
      t.id = j.at("track_id").get<std::size_t>();
      for (const auto& p : j.at("positions")) {
        if (!p.is_array() || p.size() != 2) throw ValidationError("position must be [x, y]");
        t.positions.push_back({p[0].get<int>(), p[1].get<int>()});
      }
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("track file line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string layout_to_json(const GridConfig& config, std::span<const CameraSpec> cameras) {
  nlohmann::ordered_json j;
  j["grid"] = {{"w", config.width}, {"h", config.height}};
  auto cams = nlohmann::ordered_json::array();
  for (const auto& c : cameras) {
    nlohmann::ordered_json cj;
    cj["id"] = c.id;
    cj["x0"] = c.x0;
    cj["y0"] = c.y0;
    cj["x1"] = c.x1;
    cj["y1"] = c.y1;
    cams.push_back(cj);
  }
  j["cameras"] = cams;
  return j.dump(2) + "\n";
}

Layout layout_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Layout l;
    l.width = j.at("grid").at("w").get<int>();
    l.height = j.at("grid").at("h").get<int>();
    for (const auto& c : j.at("cameras"))
      l.cameras.push_back({c.at("id").get<int>(), c.at("x0").get<int>(), c.at("y0").get<int>(),
                           c.at("x1").get<int>(), c.at("y1").get<int>()});
    GridConfig g;
    g.width = l.width;
    g.height = l.height;
    validate_layout(g, l.cameras);
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed camera layout: ") + e.what());
  }
}

}  // namespace dan
