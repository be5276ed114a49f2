#pragma once

// Synthetic camera-selection tracking world: persistent random-walk people on
// a grid, rectangular camera footprints with miss and displacement noise, and
// the per-axis discrete models used by the model-based reference.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dan/belief_engine.hpp"
#include "dan/rng.hpp"

namespace dan {

struct GridConfig {
  int width = 10;
  int height = 10;
  int n_cameras = 4;
  int episode_len = 12;
  double walk_persistence = 0.5;  // probability of repeating the previous unit move
  double noise_adjacent = 0.05;   // covered reading displaced to a neighbouring cell
  double miss_prob = 0.05;        // covered person still yields null

  void validate() const;
};

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

/// Inclusive cell rectangle [x0, x1] x [y0, y1].
struct CameraSpec {
  int id = 0;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool covers(Cell c) const noexcept { return c.x >= x0 && c.x <= x1 && c.y >= y0 && c.y <= y1; }
  bool operator==(const CameraSpec&) const = default;
};

struct Track {
  std::size_t id = 0;
  std::vector<Cell> positions;
  bool operator==(const Track&) const = default;
};

/// Null means both readings are absent.
struct EnvObservation {
  int camera_id = 0;
  std::optional<int> reading_x;
  std::optional<int> reading_y;

  bool is_null() const noexcept { return !reading_x.has_value(); }
};

/// Throws ValidationError if a rectangle leaves the grid or ids are not 0..n-1.
void validate_layout(const GridConfig& config, std::span<const CameraSpec> cameras);

/// Overlapping rectangles tiling a centred block of ~70% of the cells, one per
/// camera, leaving a blind border.
std::vector<CameraSpec> default_camera_layout(const GridConfig& config);

struct Move {
  int dx = 0;
  int dy = 0;
};

/// One persistent random walk of config.episode_len cells. Without
/// `first_move`, the first step is drawn like any non-repeated step.
Track walk_track(const GridConfig& config, Cell start, std::optional<Move> first_move, Rng& rng,
                 std::size_t id = 0);

struct TrackDataset {
  std::vector<Track> train;
  std::vector<Track> test;
};

/// Uniform starts, per-track seeds derived from `seed`, first 80% train.
TrackDataset generate_dataset(const GridConfig& config, std::span<const CameraSpec> cameras,
                              std::size_t n_tracks, std::uint64_t seed);

/// Camera reading of a person at `pos`.
EnvObservation observe(const GridConfig& config, const CameraSpec& camera, Cell pos, Rng& rng);

struct TrackingStep {
  EnvObservation obs;
  Cell truth;
};

/// Single-owner episode over one track.
class TrackingEpisode {
 public:
  TrackingEpisode(GridConfig config, std::vector<CameraSpec> cameras, Track track, Rng rng);

  /// Throws StateError after the last position.
  TrackingStep step(std::size_t camera);

  bool done() const noexcept { return t_ >= track_.positions.size(); }
  std::size_t time() const noexcept { return t_; }
  std::size_t length() const noexcept { return track_.positions.size(); }

 private:
  GridConfig config_;
  std::vector<CameraSpec> cameras_;
  Track track_;
  Rng rng_;
  std::size_t t_ = 0;
};

struct MultiPersonStep {
  std::vector<EnvObservation> obs;
  std::vector<Cell> truth;
};

/// Several independent people viewed through one shared camera choice.
class MultiPersonEpisode {
 public:
  /// Throws ValidationError on an empty list or mismatched track lengths.
  MultiPersonEpisode(GridConfig config, std::vector<CameraSpec> cameras, std::vector<Track> tracks, Rng rng);

  MultiPersonStep step(std::size_t camera);

  std::size_t persons() const noexcept { return tracks_.size(); }
  bool done() const noexcept { return t_ >= length_; }
  std::size_t length() const noexcept { return length_; }

 private:
  GridConfig config_;
  std::vector<CameraSpec> cameras_;
  std::vector<Track> tracks_;
  Rng rng_;
  std::size_t length_ = 0;
  std::size_t t_ = 0;
};

enum class Axis { kX, kY };

/// Axis size; the null reading is encoded as this value.
int axis_size(const GridConfig& config, Axis axis);
std::size_t encode_reading(const EnvObservation& obs, Axis axis, const GridConfig& config);
int coordinate(Cell c, Axis axis);

/// Per-axis model: the clipped uniform {-1, 0, +1} walk kernel and, per camera,
/// the reading distribution over cells plus null with the other axis at its
/// uniform marginal.
DiscreteModel factored_model(const GridConfig& config, std::span<const CameraSpec> cameras, Axis axis);

enum class RewardMode { kDan, kDanPlusCoverage, kCoverage };

/// coverage: 1 for any reading; dan_plus_coverage: 1 correct, 0.2 for a
/// reading with a wrong prediction; dan: 1 correct.
double coverage_reward(const EnvObservation& obs, bool prediction_correct, RewardMode mode);

std::string tracks_to_jsonl(std::span<const Track> tracks);
std::vector<Track> tracks_from_jsonl(const std::string& text);

/// {grid: {w, h}, cameras: [{id, x0, y0, x1, y1}]}
std::string layout_to_json(const GridConfig& config, std::span<const CameraSpec> cameras);
struct Layout {
  int width = 0;
  int height = 0;
  std::vector<CameraSpec> cameras;
};
Layout layout_from_json(const std::string& text);

}  // namespace dan
