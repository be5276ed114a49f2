#include "dan/attention_env.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <json.hpp>

#include "dan/errors.hpp"
#include "dan/rng.hpp"

namespace dan {

void GlyphDataset::validate() const {
  if (n_classes < 2) throw ValidationError("glyph dataset needs at least 2 classes");
  std::map<int, std::size_t> per_class;
  for (const ImageSet* s : {&train, &test}) {
    if (s->images.size() != s->labels.size()) throw ValidationError("image/label count mismatch");
    if (s->rows != rows || s->cols != cols) throw ValidationError("split shape differs from dataset shape");
    for (std::size_t i = 0; i < s->images.size(); ++i) {
      if (s->labels[i] < 0 || s->labels[i] >= n_classes) throw ValidationError("label out of range");
      if (s->images[i].size() != static_cast<std::size_t>(rows * cols)) throw ValidationError("image has wrong size");
      ++per_class[s->labels[i]];
    }
  }
  for (int c = 0; c < n_classes; ++c)
    if (per_class[c] < 2) throw ValidationError("class " + std::to_string(c) + " has fewer than 2 images");
}

std::vector<std::vector<double>> base_glyphs() {
  constexpr int kRows = 12, kCols = 12;
  // Seven segments, each a 2-pixel-thick stroke: {row0, row1, col0, col1}.
  struct Rect {
    int r0, r1, c0, c1;
  };
  const Rect seg[7] = {
      {1, 2, 3, 8},   // a: top
      {1, 6, 8, 9},   // b: upper right
      {5, 10, 8, 9},  // c: lower right
      {9, 10, 3, 8},  // d: bottom
      {5, 10, 2, 3},  // e: lower left
      {1, 6, 2, 3},   // f: upper left
      {5, 6, 3, 8},   // g: middle
  };
  const char* digits[10] = {"abcdef", "bc", "abged", "abgcd", "fgbc", "afgcd", "afgedc", "abc", "abcdefg", "abcdfg"};
  std::vector<std::vector<double>> out;
  for (const char* d : digits) {
    std::vector<double> img(kRows * kCols, 0.0);
    for (const char* s = d; *s; ++s) {
      const Rect& r = seg[*s - 'a'];
      for (int y = r.r0; y <= r.r1; ++y)
        for (int x = r.c0; x <= r.c1; ++x) img[static_cast<std::size_t>(y * kCols + x)] = 1.0;
    }
    out.push_back(std::move(img));
  }
  return out;
}

GlyphDataset make_glyph_dataset(std::uint64_t seed, std::size_t n_per_class, double pixel_noise) {
  if (n_per_class < 2) throw ValidationError("n_per_class must be at least 2");
  if (!(pixel_noise >= 0.0 && pixel_noise <= 1.0)) throw ValidationError("pixel_noise must be in [0, 1]");
  GlyphDataset ds;
  ds.pixel_noise = pixel_noise;
  ds.train.rows = ds.test.rows = ds.rows;
  ds.train.cols = ds.test.cols = ds.cols;
  const auto glyphs = base_glyphs();
  const std::size_t n_train = std::min(n_per_class * 4 / 5, n_per_class - 1);
  for (int c = 0; c < ds.n_classes; ++c) {
    Rng rng(derive_seed(seed, "glyph_class", static_cast<std::uint64_t>(c)));
    for (std::size_t i = 0; i < n_per_class; ++i) {
      auto img = glyphs[static_cast<std::size_t>(c)];
      for (auto& px : img)
        if (rng.bernoulli(pixel_noise)) px = 1.0 - px;
      ImageSet& dst = i < n_train ? ds.train : ds.test;
      dst.images.push_back(std::move(img));
      dst.labels.push_back(c);
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what) {
  if (bytes.size() < offset + 4)
    throw IdxFormatError(IdxErrorCode::kTruncated, bytes.size(), std::string(what) + ": header ends early");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IdxFormatError(IdxErrorCode::kIo, 0, "cannot open " + path);
  std::vector<std::uint8_t> data;
  std::uint8_t buf[65536];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) data.insert(data.end(), buf, buf + n);
  std::fclose(f);
  return data;
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& data) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IdxFormatError(IdxErrorCode::kIo, 0, "cannot write " + path);
  const std::size_t n = std::fwrite(data.data(), 1, data.size(), f);
  std::fclose(f);
  if (n != data.size()) throw IdxFormatError(IdxErrorCode::kIo, n, "short write to " + path);
}

}  // namespace

const char* to_string(IdxErrorCode code) {
  switch (code) {
    case IdxErrorCode::kIo:
      return "idx io error";
    case IdxErrorCode::kBadMagic:
      return "idx bad magic";
    case IdxErrorCode::kTruncated:
      return "idx truncated";
    case IdxErrorCode::kCountMismatch:
      return "idx count mismatch";
  }
  return "idx error";
}

ImageSet parse_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes) {
  if (read_be32(image_bytes, 0, "images") != kImageMagic)
    throw IdxFormatError(IdxErrorCode::kBadMagic, 0, "images file magic is not 0x00000803");
  if (read_be32(label_bytes, 0, "labels") != kLabelMagic)
    throw IdxFormatError(IdxErrorCode::kBadMagic, 0, "labels file magic is not 0x00000801");

  const std::uint32_t n_images = read_be32(image_bytes, 4, "images");
  const std::uint32_t rows = read_be32(image_bytes, 8, "images");
  const std::uint32_t cols = read_be32(image_bytes, 12, "images");
  const std::uint32_t n_labels = read_be32(label_bytes, 4, "labels");
  if (n_labels != n_images)
    throw IdxFormatError(IdxErrorCode::kCountMismatch, 4,
                         "labels file holds " + std::to_string(n_labels) + " labels for " +
                             std::to_string(n_images) + " images");

  const std::size_t pixels = std::size_t{rows} * cols;
  const std::size_t need_images = 16 + std::size_t{n_images} * pixels;
  if (image_bytes.size() < need_images)
    throw IdxFormatError(IdxErrorCode::kTruncated, image_bytes.size(),
                         "images payload needs " + std::to_string(need_images) + " bytes");
  if (label_bytes.size() < 8 + std::size_t{n_labels})
    throw IdxFormatError(IdxErrorCode::kTruncated, label_bytes.size(),
                         "labels payload needs " + std::to_string(8 + std::size_t{n_labels}) + " bytes");

  ImageSet set;
  set.rows = static_cast<int>(rows);
  set.cols = static_cast<int>(cols);
  set.images.reserve(n_images);
  for (std::size_t i = 0; i < n_images; ++i) {
    std::vector<double> img(pixels);
    const std::size_t base = 16 + i * pixels;
    for (std::size_t p = 0; p < pixels; ++p) img[p] = image_bytes[base + p] / 255.0;
    set.images.push_back(std::move(img));
    set.labels.push_back(label_bytes[8 + i]);
  }
  return set;
}

ImageSet load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  return parse_idx(images, labels);
}

std::vector<std::uint8_t> encode_idx_images(const ImageSet& set) {
  std::vector<std::uint8_t> out;
  put_be32(out, kImageMagic);
  put_be32(out, static_cast<std::uint32_t>(set.images.size()));
  put_be32(out, static_cast<std::uint32_t>(set.rows));
  put_be32(out, static_cast<std::uint32_t>(set.cols));
  for (const auto& img : set.images)
    for (double v : img) out.push_back(quantize(v));
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const ImageSet& set) {
  std::vector<std::uint8_t> out;
  put_be32(out, kLabelMagic);
  put_be32(out, static_cast<std::uint32_t>(set.labels.size()));
  for (int l : set.labels) {
    if (l < 0 || l > 255) throw ValidationError("IDX labels must fit in one byte");
    out.push_back(static_cast<std::uint8_t>(l));
  }
  return out;
}

void write_idx(const ImageSet& set, const std::string& images_path, const std::string& labels_path) {
  write_file(images_path, encode_idx_images(set));
  write_file(labels_path, encode_idx_labels(set));
}

// ---------------------------------------------------------------------------
// JSON with base64 payloads

namespace {

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<std::vector<std::uint8_t>::const_iterator, 6, 8>>;
  std::string out(It(bytes.begin()), It(bytes.end()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string text) {
  using namespace boost::archive::iterators;
  using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
  const auto pad = static_cast<std::size_t>(std::count(text.begin(), text.end(), '='));
  std::replace(text.begin(), text.end(), '=', 'A');
  std::vector<std::uint8_t> out;
  try {
    for (It it(text.begin()), end(text.end()); it != end; ++it) out.push_back(static_cast<std::uint8_t>(*it));
  } catch (const std::exception&) {
    throw ValidationError("malformed base64 payload");
  }
  out.resize(out.size() - std::min(pad, out.size()));
  return out;
}

nlohmann::ordered_json split_to_json(const ImageSet& s) {
  std::vector<std::uint8_t> bytes;
  for (const auto& img : s.images)
    for (double v : img) bytes.push_back(quantize(v));
  nlohmann::ordered_json j;
  j["count"] = s.images.size();
  j["labels"] = s.labels;
  j["pixels"] = base64_encode(bytes);
  return j;
}

ImageSet split_from_json(const nlohmann::json& j, int rows, int cols) {
  ImageSet s;
  s.rows = rows;
  s.cols = cols;
  const auto count = j.at("count").get<std::size_t>();
  s.labels = j.at("labels").get<std::vector<int>>();
  const auto bytes = base64_decode(j.at("pixels").get<std::string>());
  const std::size_t pixels = static_cast<std::size_t>(rows * cols);
  if (s.labels.size() != count || bytes.size() != count * pixels)
    throw ValidationError("glyph split payload does not match its count");
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> img(pixels);
    for (std::size_t p = 0; p < pixels; ++p) img[p] = bytes[i * pixels + p] / 255.0;
    s.images.push_back(std::move(img));
  }
  return s;
}

}  // namespace

std::string glyphs_to_json(const GlyphDataset& ds) {
  nlohmann::ordered_json j;
  j["format"] = "dan-glyphs";
  j["version"] = 1;
  j["n_classes"] = ds.n_classes;
  j["rows"] = ds.rows;
  j["cols"] = ds.cols;
  j["pixel_noise"] = ds.pixel_noise;
  j["train"] = split_to_json(ds.train);
  j["test"] = split_to_json(ds.test);
  return j.dump() + "\n";
}

GlyphDataset glyphs_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    GlyphDataset ds;
    ds.n_classes = j.at("n_classes").get<int>();
    ds.rows = j.at("rows").get<int>();
    ds.cols = j.at("cols").get<int>();
    ds.pixel_noise = j.at("pixel_noise").get<double>();
    ds.train = split_from_json(j.at("train"), ds.rows, ds.cols);
    ds.test = split_from_json(j.at("test"), ds.rows, ds.cols);
    ds.validate();
    return ds;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed glyph dataset: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Glimpse episodes

void GlimpseSpec::validate(int rows, int cols) const {
  if (patch_rows < 1 || patch_cols < 1 || n_patches() < 2) throw ValidationError("need at least 2 patches");
  if (rows % patch_rows != 0 || cols % patch_cols != 0)
    throw ValidationError("patch grid does not tile the image exactly");
  if (episode_len < 1) throw ValidationError("episode_len must be at least 1");
}

AttentionEpisode::AttentionEpisode(GlimpseSpec spec, std::vector<double> image, int rows, int cols, int label)
    : spec_(spec),
      image_(std::move(image)),
      rows_(rows),
      cols_(cols),
      label_(label),
      composite_(image_.size(), 0.0),
      revealed_(static_cast<std::size_t>(spec.n_patches()), false) {
  spec_.validate(rows_, cols_);
  if (image_.size() != static_cast<std::size_t>(rows_ * cols_)) throw ValidationError("image size mismatch");
}

AttentionStep AttentionEpisode::step(std::size_t patch) {
  if (done()) throw StateError("attention episode already ended");
  if (patch >= revealed_.size()) throw ValidationError("patch index out of range");
  ++t_;
  if (!revealed_[patch]) {
    revealed_[patch] = true;
    const int ph = rows_ / spec_.patch_rows;
    const int pw = cols_ / spec_.patch_cols;
    const int pr = static_cast<int>(patch) / spec_.patch_cols;
    const int pc = static_cast<int>(patch) % spec_.patch_cols;
    for (int y = pr * ph; y < (pr + 1) * ph; ++y)
      for (int x = pc * pw; x < (pc + 1) * pw; ++x) {
        const auto i = static_cast<std::size_t>(y * cols_ + x);
        composite_[i] = image_[i];
      }
  }
  return {composite_, label_};
}

double reward_schedule(RewardSchedule mode, std::size_t step_idx, std::size_t episode_len, bool correct) {
  if (step_idx >= episode_len) throw ValidationError("step index outside the episode");
  if (mode == RewardSchedule::kTerminal && step_idx + 1 != episode_len) return 0.0;
  return correct ? 1.0 : 0.0;
}

}  // namespace dan
