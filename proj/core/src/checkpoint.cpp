#include <string>

#include <json.hpp>

#include "dan/errors.hpp"
#include "dan/neural.hpp"

namespace dan {

namespace {

using ojson = nlohmann::ordered_json;

constexpr const char* kFormat = "dan-network";
constexpr int kVersion = 1;

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kRecurrent: return "recurrent";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kOutput: return "output";
  }
  return "?";
}

LayerKind kind_from(const std::string& s) {
  if (s == "dense") return LayerKind::kDense;
  if (s == "relu") return LayerKind::kRelu;
  if (s == "recurrent") return LayerKind::kRecurrent;
  if (s == "dropout") return LayerKind::kDropout;
  if (s == "output") return LayerKind::kOutput;
  throw ValidationError("unknown layer kind '" + s + "'");
}

ojson spec_json(const NetworkSpec& spec) {
  ojson j;
  j["input_size"] = spec.input_size;
  j["l2_scale"] = spec.l2_scale;
  auto layers = ojson::array();
  for (const auto& l : spec.layers) {
    ojson lj;
    lj["kind"] = kind_name(l.kind);
    if (l.kind == LayerKind::kDropout)
      lj["rate"] = l.rate;
    else if (l.kind != LayerKind::kRelu)
      lj["size"] = l.size;
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  return j;
}

NetworkSpec spec_parse(const nlohmann::json& j) {
  NetworkSpec spec;
  spec.input_size = j.at("input_size").get<int>();
  spec.l2_scale = j.at("l2_scale").get<double>();
  for (const auto& lj : j.at("layers")) {
    LayerSpec l;
    l.kind = kind_from(lj.at("kind").get<std::string>());
    if (lj.contains("size")) l.size = lj.at("size").get<int>();
    if (lj.contains("rate")) l.rate = lj.at("rate").get<double>();
    spec.layers.push_back(l);
  }
  spec.validate();
  return spec;
}

// Matrices are stored row-major as flat arrays.
ojson flat(const Eigen::MatrixXd& m) {
  auto a = ojson::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
  return a;
}

Eigen::MatrixXd unflat(const nlohmann::json& a, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (a.size() != static_cast<std::size_t>(rows * cols))
    throw ValidationError(std::string("checkpoint tensor '") + what + "' has the wrong length");
  Eigen::MatrixXd m(rows, cols);
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = a[i++].get<double>();
  return m;
}

}  // namespace

std::string spec_to_json(const NetworkSpec& spec) { return spec_json(spec).dump() + "\n"; }

NetworkSpec spec_from_json(const std::string& text) {
  try {
    return spec_parse(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed network spec: ") + e.what());
  }
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  ojson j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["spec"] = spec_json(ckpt.spec);
  auto layers = ojson::array();
  for (const auto& lp : ckpt.params.layers) {
    ojson lj = ojson::object();
    if (lp.w.size()) lj["w"] = flat(lp.w);
    if (lp.u.size()) lj["u"] = flat(lp.u);
    if (lp.b.size()) lj["b"] = flat(lp.b);
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  j["rng_state"] = ckpt.rng_state;
  j["step_counter"] = ckpt.step_counter;
  return j.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != kFormat) throw ValidationError("not a network checkpoint");
    if (j.at("version").get<int>() != kVersion)
      throw ValidationError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    Checkpoint ck;
    ck.spec = spec_parse(j.at("spec"));
    const auto widths = ck.spec.widths();
    const auto& layers = j.at("layers");
    if (layers.size() != ck.spec.layers.size()) throw ValidationError("checkpoint layer count mismatch");
    for (std::size_t i = 0; i < ck.spec.layers.size(); ++i) {
      const auto& l = ck.spec.layers[i];
      const auto& lj = layers[i];
      LayerParams lp;
      if (l.kind == LayerKind::kDense || l.kind == LayerKind::kOutput || l.kind == LayerKind::kRecurrent) {
        lp.w = unflat(lj.at("w"), l.size, widths[i], "w");
        lp.b = unflat(lj.at("b"), l.size, 1, "b");
        if (l.kind == LayerKind::kRecurrent) lp.u = unflat(lj.at("u"), l.size, l.size, "u");
      }
      ck.params.layers.push_back(std::move(lp));
    }
    ck.rng_state = j.at("rng_state").get<std::string>();
    ck.step_counter = j.at("step_counter").get<std::int64_t>();
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

}  // namespace dan
