#pragma once

// Discrete glimpse environment: a static image is hidden behind a patch grid
// and each action reveals one patch. Includes a synthetic digit-like glyph set
// and IDX (MNIST-format) ingestion.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dan {

/// Grayscale images in [0, 1], row-major, with integer labels.
struct ImageSet {
  int rows = 0;
  int cols = 0;
  std::vector<std::vector<double>> images;
  std::vector<int> labels;

  std::size_t size() const noexcept { return images.size(); }
  bool operator==(const ImageSet&) const = default;
};

struct GlyphDataset {
  int n_classes = 10;
  int rows = 12;
  int cols = 12;
  double pixel_noise = 0.0;
  ImageSet train;
  ImageSet test;

  /// Labels in range, >= 2 images per class overall, consistent shapes.
  void validate() const;
};

/// The ten 12x12 seven-segment style base glyphs, one per class.
std::vector<std::vector<double>> base_glyphs();

/// n_per_class instances per class, each pixel flipped with probability
/// pixel_noise; floor(0.8 n) of each class go to train (at least one to test).
GlyphDataset make_glyph_dataset(std::uint64_t seed, std::size_t n_per_class, double pixel_noise);

/// Parses IDX buffers (magic 0x00000803 images, 0x00000801 labels, big-endian
/// counts, unsigned bytes scaled by 1/255). Throws IdxFormatError.
ImageSet parse_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes);
ImageSet load_idx(const std::string& images_path, const std::string& labels_path);

/// Pixels are quantized to round(255 v).
std::vector<std::uint8_t> encode_idx_images(const ImageSet& set);
std::vector<std::uint8_t> encode_idx_labels(const ImageSet& set);
void write_idx(const ImageSet& set, const std::string& images_path, const std::string& labels_path);

/// JSON document with base64 pixel payloads (bytes as in IDX).
std::string glyphs_to_json(const GlyphDataset& ds);
GlyphDataset glyphs_from_json(const std::string& text);

struct GlimpseSpec {
  int patch_rows = 4;  // patches per image column
  int patch_cols = 4;  // patches per image row
  int episode_len = 12;

  int n_patches() const noexcept { return patch_rows * patch_cols; }
  /// Patches must tile a rows x cols image exactly.
  void validate(int rows, int cols) const;
};

struct AttentionStep {
  const std::vector<double>& composite;
  int label;
};

/// Single-owner glimpse episode over one image.
class AttentionEpisode {
 public:
  AttentionEpisode(GlimpseSpec spec, std::vector<double> image, int rows, int cols, int label);

  /// Reveals `patch` (idempotent). Throws StateError past episode_len.
  AttentionStep step(std::size_t patch);

  const std::vector<double>& composite() const noexcept { return composite_; }
  const std::vector<bool>& revealed() const noexcept { return revealed_; }
  const std::vector<double>& source() const noexcept { return image_; }
  int label() const noexcept { return label_; }
  std::size_t time() const noexcept { return t_; }
  bool done() const noexcept { return t_ >= static_cast<std::size_t>(spec_.episode_len); }

 private:
  GlimpseSpec spec_;
  std::vector<double> image_;
  int rows_, cols_, label_;
  std::vector<double> composite_;
  std::vector<bool> revealed_;
  std::size_t t_ = 0;
};

enum class RewardSchedule { kContinuous, kTerminal };

/// continuous: 1 if correct at every step; terminal: only the last step counts.
double reward_schedule(RewardSchedule mode, std::size_t step_idx, std::size_t episode_len, bool correct);

}  // namespace dan
