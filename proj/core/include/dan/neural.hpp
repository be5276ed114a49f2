#pragma once

// Small from-scratch function approximators for the Q and M networks:
// dense, ReLU, a tanh (Elman) recurrent cell, inverted dropout and a linear
// output layer, with backpropagation through time, L2 weight decay, global
// norm clipping and Adam.
//
// Sequences are batched column-wise: step t of a batch of B sequences is an
// (input_size x B) matrix.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dan {

enum class LayerKind { kDense, kRelu, kRecurrent, kDropout, kOutput };

struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  int size = 0;       // dense / recurrent / output width
  double rate = 0.0;  // dropout probability

  static LayerSpec dense(int n) { return {LayerKind::kDense, n, 0.0}; }
  static LayerSpec relu() { return {LayerKind::kRelu, 0, 0.0}; }
  static LayerSpec recurrent(int n) { return {LayerKind::kRecurrent, n, 0.0}; }
  static LayerSpec dropout(double p) { return {LayerKind::kDropout, 0, p}; }
  static LayerSpec output(int n) { return {LayerKind::kOutput, n, 0.0}; }

  bool operator==(const LayerSpec&) const = default;
};

struct NetworkSpec {
  int input_size = 0;
  std::vector<LayerSpec> layers;
  double l2_scale = 0.01;

  /// Positive sizes, at most one recurrent layer, output layer last.
  void validate() const;
  int output_size() const;
  /// Width flowing into layer i (and out of the network at index layers.size()).
  std::vector<int> widths() const;

  bool operator==(const NetworkSpec&) const = default;
};

/// Dense/output: w (out x in), b. Recurrent: w (out x in), u (out x out), b.
/// Non-parametric layers hold empty tensors.
struct LayerParams {
  Eigen::MatrixXd w;
  Eigen::MatrixXd u;
  Eigen::VectorXd b;
};

struct Parameters {
  std::vector<LayerParams> layers;

  std::size_t count() const;
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> values);
  /// Same shapes, all zeros.
  Parameters zeros_like() const;

  /// Calls fn(double* data, std::size_t n, bool is_weight) for each tensor.
  template <typename Fn>
  void for_each_tensor(Fn&& fn);
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const;

  bool operator==(const Parameters& other) const;
};

using Gradients = Parameters;

/// Glorot-uniform weights in ±sqrt(6 / (fan_in + fan_out)), zero biases.
Parameters init_parameters(const NetworkSpec& spec, std::uint64_t seed);

using Sequence = std::vector<Eigen::MatrixXd>;

enum class ForwardMode { kEval, kTrain };

struct ForwardTrace {
  /// acts[t][l] is the input of layer l at step t; acts[t].back() is the output.
  std::vector<std::vector<Eigen::MatrixXd>> acts;
  /// Scaled keep-masks of dropout layers, same indexing as acts.
  std::vector<std::vector<Eigen::MatrixXd>> masks;

  std::size_t steps() const noexcept { return acts.size(); }
  const Eigen::MatrixXd& output(std::size_t t) const { return acts[t].back(); }
};

/// Runs the whole sequence with the recurrent state starting at zero.
/// Dropout is active only in train mode, with masks drawn from dropout_seed.
ForwardTrace forward(const Parameters& params, const NetworkSpec& spec, const Sequence& inputs,
                     ForwardMode mode = ForwardMode::kEval, std::uint64_t dropout_seed = 0);

/// Gradient of sum_t <output_grads[t], output_t> + l2_scale * sum ||W||^2.
Gradients backward(const Parameters& params, const NetworkSpec& spec, const ForwardTrace& trace,
                   const Sequence& output_grads);

/// Hidden state of the recurrent layer for incremental (eval-mode) inference.
struct RecurrentState {
  Eigen::MatrixXd h;  // empty until the first step
};

/// One eval-mode step; equivalent to the last output of `forward` on the
/// sequence seen so far.
Eigen::MatrixXd forward_step(const Parameters& params, const NetworkSpec& spec, const Eigen::MatrixXd& input,
                             RecurrentState& state);

double l2_penalty(const Parameters& params, const NetworkSpec& spec);

struct CrossEntropy {
  double loss = 0.0;
  Eigen::VectorXd grad;  // softmax(logits) - one_hot(label)
};

/// -log softmax(logits)[label]. Throws ValidationError for an out-of-range label.
CrossEntropy cross_entropy_loss(const Eigen::VectorXd& logits, int label);

/// Scales gradients so their global L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_global_norm(Gradients& grads, double max_norm);

struct AdamState {
  Parameters m;
  Parameters v;
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const Parameters& params, double lr);
};

/// Bias-corrected Adam update. Throws NumericError on non-finite gradients.
void adam_step(Parameters& params, const Gradients& grads, AdamState& state);

/// {format, version, spec, layers: [[flat tensors]], rng_state, step_counter}
struct Checkpoint {
  NetworkSpec spec;
  Parameters params;
  std::string rng_state;
  std::int64_t step_counter = 0;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

std::string spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const std::string& text);

struct GradCheckResult {
  double max_rel_error = 0.0;  // |a - n| / max(|a|, |n|, 1e-3)
  std::size_t worst_layer = 0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Central finite differences (step 1e-5) of a random linear functional of the
/// outputs plus L2, against `backward`. Train mode with a fixed dropout seed.
/// `sign_flip` negates the analytic gradient (detector self-test).
GradCheckResult gradient_check(const NetworkSpec& spec, std::uint64_t seed, std::size_t steps = 4,
                               std::size_t batch = 2, double tolerance = 1e-4, bool sign_flip = false);

/// Random network spec for gradient checking; always contains a recurrent layer.
NetworkSpec random_spec(std::uint64_t seed);

// ---------------------------------------------------------------------------

template <typename Fn>
void Parameters::for_each_tensor(Fn&& fn) {
  for (auto& l : layers) {
    if (l.w.size()) fn(l.w.data(), static_cast<std::size_t>(l.w.size()), true);
    if (l.u.size()) fn(l.u.data(), static_cast<std::size_t>(l.u.size()), true);
    if (l.b.size()) fn(l.b.data(), static_cast<std::size_t>(l.b.size()), false);
  }
}

template <typename Fn>
void Parameters::for_each_tensor(Fn&& fn) const {
  for (const auto& l : layers) {
    if (l.w.size()) fn(l.w.data(), static_cast<std::size_t>(l.w.size()), true);
    if (l.u.size()) fn(l.u.data(), static_cast<std::size_t>(l.u.size()), true);
    if (l.b.size()) fn(l.b.data(), static_cast<std::size_t>(l.b.size()), false);
  }
}

}  // namespace dan
