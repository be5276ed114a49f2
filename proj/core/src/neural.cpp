#include "dan/neural.hpp"

#include <algorithm>
#include <cmath>

#include "dan/errors.hpp"
#include "dan/rng.hpp"

namespace dan {

void NetworkSpec::validate() const {
  if (input_size <= 0) throw ValidationError("network input_size must be positive");
  if (layers.empty() || layers.back().kind != LayerKind::kOutput)
    throw ValidationError("network must end with an output layer");
  int recurrent = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    switch (l.kind) {
      case LayerKind::kDense:
      case LayerKind::kRecurrent:
      case LayerKind::kOutput:
        if (l.size <= 0) throw ValidationError("layer " + std::to_string(i) + " needs a positive size");
        break;
      case LayerKind::kDropout:
        if (!(l.rate >= 0.0 && l.rate < 1.0)) throw ValidationError("dropout rate must be in [0, 1)");
        break;
      case LayerKind::kRelu:
        break;
    }
    if (l.kind == LayerKind::kRecurrent) ++recurrent;
    if (l.kind == LayerKind::kOutput && i + 1 != layers.size())
      throw ValidationError("output layer must be last");
  }
  if (recurrent > 1) throw ValidationError("at most one recurrent layer is supported");
  if (!(l2_scale >= 0.0)) throw ValidationError("l2_scale must be non-negative");
}

std::vector<int> NetworkSpec::widths() const {
  std::vector<int> w{input_size};
  for (const auto& l : layers) {
    const bool resizes = l.kind == LayerKind::kDense || l.kind == LayerKind::kRecurrent || l.kind == LayerKind::kOutput;
    w.push_back(resizes ? l.size : w.back());
  }
  return w;
}

int NetworkSpec::output_size() const { return widths().back(); }

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for_each_tensor([&](const double*, std::size_t k, bool) { n += k; });
  return n;
}

std::vector<double> Parameters::flatten() const {
  std::vector<double> out;
  out.reserve(count());
  for_each_tensor([&](const double* d, std::size_t k, bool) { out.insert(out.end(), d, d + k); });
  return out;
}

void Parameters::unflatten(std::span<const double> values) {
  if (values.size() != count()) throw ValidationError("flat parameter vector has the wrong length");
  std::size_t off = 0;
  for_each_tensor([&](double* d, std::size_t k, bool) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(off), k, d);
    off += k;
  });
}

Parameters Parameters::zeros_like() const {
  Parameters z = *this;
  z.for_each_tensor([](double* d, std::size_t k, bool) { std::fill_n(d, k, 0.0); });
  return z;
}

bool Parameters::operator==(const Parameters& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.w.rows() != b.w.rows() || a.w.cols() != b.w.cols() || a.u.size() != b.u.size() || a.b.size() != b.b.size())
      return false;
    if (a.w != b.w || a.u != b.u || a.b != b.b) return false;
  }
  return true;
}

Parameters init_parameters(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, "init_parameters"));
  auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
    return m;
  };
  const auto widths = spec.widths();
  Parameters p;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    LayerParams lp;
    if (l.kind == LayerKind::kDense || l.kind == LayerKind::kOutput || l.kind == LayerKind::kRecurrent) {
      lp.w = glorot(l.size, widths[i]);
      if (l.kind == LayerKind::kRecurrent) lp.u = glorot(l.size, l.size);
      lp.b = Eigen::VectorXd::Zero(l.size);
    }
    p.layers.push_back(std::move(lp));
  }
  return p;
}

namespace {

void check_shapes(const Parameters& params, const NetworkSpec& spec) {
  if (params.layers.size() != spec.layers.size()) throw ValidationError("parameters do not match the network spec");
  const auto widths = spec.widths();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const auto& lp = params.layers[i];
    const bool parametric =
        l.kind == LayerKind::kDense || l.kind == LayerKind::kOutput || l.kind == LayerKind::kRecurrent;
    if (parametric && (lp.w.rows() != l.size || lp.w.cols() != widths[i] || lp.b.size() != l.size))
      throw ValidationError("parameter shape mismatch at layer " + std::to_string(i));
    if (l.kind == LayerKind::kRecurrent && (lp.u.rows() != l.size || lp.u.cols() != l.size))
      throw ValidationError("recurrent weight shape mismatch at layer " + std::to_string(i));
  }
}

}  // namespace

ForwardTrace forward(const Parameters& params, const NetworkSpec& spec, const Sequence& inputs, ForwardMode mode,
                     std::uint64_t dropout_seed) {
  check_shapes(params, spec);
  const std::size_t n_layers = spec.layers.size();
  ForwardTrace tr;
  tr.acts.resize(inputs.size());
  tr.masks.resize(inputs.size());
  Rng rng(derive_seed(dropout_seed, "dropout"));
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (inputs[t].rows() != spec.input_size)
      throw ValidationError("input width " + std::to_string(inputs[t].rows()) + " != " +
                            std::to_string(spec.input_size));
    if (t > 0 && inputs[t].cols() != inputs[0].cols()) throw ValidationError("batch width changes within sequence");
    auto& acts = tr.acts[t];
    acts.resize(n_layers + 1);
    tr.masks[t].resize(n_layers);
    acts[0] = inputs[t];
    for (std::size_t l = 0; l < n_layers; ++l) {
      const auto& spec_l = spec.layers[l];
      const auto& lp = params.layers[l];
      const Eigen::MatrixXd& x = acts[l];
      Eigen::MatrixXd& y = acts[l + 1];
      switch (spec_l.kind) {
        case LayerKind::kDense:
        case LayerKind::kOutput:
          y.noalias() = lp.w * x;
          y.colwise() += lp.b;
          break;
        case LayerKind::kRelu:
          y = x.cwiseMax(0.0);
          break;
        case LayerKind::kRecurrent:
          y.noalias() = lp.w * x;
          if (t > 0) y.noalias() += lp.u * tr.acts[t - 1][l + 1];
          y.colwise() += lp.b;
          y = y.array().tanh().matrix();
          break;
        case LayerKind::kDropout:
          if (mode == ForwardMode::kTrain && spec_l.rate > 0.0) {
            Eigen::MatrixXd& mask = tr.masks[t][l];
            mask.resize(x.rows(), x.cols());
            const double keep_scale = 1.0 / (1.0 - spec_l.rate);
            for (Eigen::Index i = 0; i < mask.size(); ++i)
              mask.data()[i] = rng.uniform() < spec_l.rate ? 0.0 : keep_scale;
            y = x.cwiseProduct(mask);
          } else {
            y = x;
          }
          break;
      }
    }
  }
  return tr;
}

Gradients backward(const Parameters& params, const NetworkSpec& spec, const ForwardTrace& trace,
                   const Sequence& output_grads) {
  check_shapes(params, spec);
  if (output_grads.size() != trace.steps()) throw ValidationError("output gradient count != sequence length");
  const std::size_t n_layers = spec.layers.size();
  Gradients g = params.zeros_like();
  // Gradient w.r.t. the recurrent pre-activation of the following step.
  std::vector<Eigen::MatrixXd> next_pre(n_layers);
  Eigen::MatrixXd dy, dx, dpre;

  for (std::size_t t = trace.steps(); t-- > 0;) {
    const auto& acts = trace.acts[t];
    dy = output_grads[t];
    if (dy.rows() != acts.back().rows() || dy.cols() != acts.back().cols())
      throw ValidationError("output gradient shape mismatch at step " + std::to_string(t));
    for (std::size_t l = n_layers; l-- > 0;) {
      const auto& spec_l = spec.layers[l];
      const auto& lp = params.layers[l];
      auto& gl = g.layers[l];
      const Eigen::MatrixXd& x = acts[l];
      switch (spec_l.kind) {
        case LayerKind::kDense:
        case LayerKind::kOutput:
          gl.w.noalias() += dy * x.transpose();
          gl.b += dy.rowwise().sum();
          dx.noalias() = lp.w.transpose() * dy;
          break;
        case LayerKind::kRelu:
          dx = (x.array() > 0.0).select(dy.array(), 0.0).matrix();
          break;
        case LayerKind::kRecurrent: {
          const Eigen::MatrixXd& h = acts[l + 1];
          if (next_pre[l].size()) dy.noalias() += lp.u.transpose() * next_pre[l];
          dpre = dy.array() * (1.0 - h.array().square());
          gl.w.noalias() += dpre * x.transpose();
          if (t > 0) gl.u.noalias() += dpre * trace.acts[t - 1][l + 1].transpose();
          gl.b += dpre.rowwise().sum();
          dx.noalias() = lp.w.transpose() * dpre;
          next_pre[l] = dpre;
          break;
        }
        case LayerKind::kDropout:
          if (trace.masks[t][l].size())
            dx = dy.cwiseProduct(trace.masks[t][l]);
          else
            dx = dy;
          break;
      }
      std::swap(dy, dx);
    }
  }

  if (spec.l2_scale > 0.0) {
    for (std::size_t l = 0; l < n_layers; ++l) {
      if (params.layers[l].w.size()) g.layers[l].w += 2.0 * spec.l2_scale * params.layers[l].w;
      if (params.layers[l].u.size()) g.layers[l].u += 2.0 * spec.l2_scale * params.layers[l].u;
    }
  }
  return g;
}

Eigen::MatrixXd forward_step(const Parameters& params, const NetworkSpec& spec, const Eigen::MatrixXd& input,
                             RecurrentState& state) {
  if (input.rows() != spec.input_size) throw ValidationError("input width does not match the network");
  Eigen::MatrixXd x = input, y;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const auto& lp = params.layers[l];
    switch (spec.layers[l].kind) {
      case LayerKind::kDense:
      case LayerKind::kOutput:
        y.noalias() = lp.w * x;
        y.colwise() += lp.b;
        break;
      case LayerKind::kRelu:
        y = x.cwiseMax(0.0);
        break;
      case LayerKind::kRecurrent:
        y.noalias() = lp.w * x;
        if (state.h.size()) y.noalias() += lp.u * state.h;
        y.colwise() += lp.b;
        y = y.array().tanh().matrix();
        state.h = y;
        break;
      case LayerKind::kDropout:
        y = x;
        break;
    }
    std::swap(x, y);
  }
  return x;
}

double l2_penalty(const Parameters& params, const NetworkSpec& spec) {
  double s = 0.0;
  params.for_each_tensor([&](const double* d, std::size_t n, bool is_weight) {
    if (!is_weight) return;
    for (std::size_t i = 0; i < n; ++i) s += d[i] * d[i];
  });
  return spec.l2_scale * s;
}

CrossEntropy cross_entropy_loss(const Eigen::VectorXd& logits, int label) {
  if (label < 0 || label >= logits.size()) throw ValidationError("cross-entropy label out of range");
  Eigen::Index top = 0;
  const double m = logits.maxCoeff(&top);
  const Eigen::VectorXd e = (logits.array() - m).exp().matrix();
  double rest = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i)
    if (i != top) rest += e(i);
  const double z = 1.0 + rest;
  CrossEntropy ce;
  ce.loss = (m - logits(label)) + std::log1p(rest);
  ce.grad = e / z;
  ce.grad(label) -= 1.0;
  return ce;
}

double clip_global_norm(Gradients& grads, double max_norm) {
  double sq = 0.0;
  grads.for_each_tensor([&](const double* d, std::size_t n, bool) {
    for (std::size_t i = 0; i < n; ++i) sq += d[i] * d[i];
  });
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    grads.for_each_tensor([&](double* d, std::size_t n, bool) {
      for (std::size_t i = 0; i < n; ++i) d[i] *= s;
    });
  }
  return norm;
}

AdamState AdamState::for_params(const Parameters& params, double lr) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  s.lr = lr;
  return s;
}

void adam_step(Parameters& params, const Gradients& grads, AdamState& state) {
  if (grads.count() != params.count() || state.m.count() != params.count())
    throw ValidationError("adam_step: shape mismatch");
  bool finite = true;
  grads.for_each_tensor([&](const double* d, std::size_t n, bool) {
    for (std::size_t i = 0; i < n; ++i) finite = finite && std::isfinite(d[i]);
  });
  if (!finite) throw NumericError("non-finite gradient passed to adam_step");

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const double b1 = state.beta1, b2 = state.beta2, lr = state.lr, eps = state.eps;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
      if (!p.size()) return;
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
      p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    auto& P = params.layers[l];
    const auto& G = grads.layers[l];
    auto& M = state.m.layers[l];
    auto& V = state.v.layers[l];
    update(P.w, G.w, M.w, V.w);
    update(P.u, G.u, M.u, V.u);
    update(P.b, G.b, M.b, V.b);
  }
}

NetworkSpec random_spec(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "random_spec"));
  NetworkSpec spec;
  spec.input_size = 2 + static_cast<int>(rng.uniform_int(5));
  spec.l2_scale = 0.01;
  const std::size_t n_dense = rng.uniform_int(3);
  for (std::size_t i = 0; i < n_dense; ++i) {
    spec.layers.push_back(LayerSpec::dense(2 + static_cast<int>(rng.uniform_int(6))));
    spec.layers.push_back(LayerSpec::relu());
  }
  if (rng.bernoulli(0.5)) spec.layers.push_back(LayerSpec::dropout(0.25));
  spec.layers.push_back(LayerSpec::recurrent(2 + static_cast<int>(rng.uniform_int(6))));
  if (rng.bernoulli(0.5)) {
    spec.layers.push_back(LayerSpec::dense(2 + static_cast<int>(rng.uniform_int(4))));
    spec.layers.push_back(LayerSpec::relu());
  }
  spec.layers.push_back(LayerSpec::output(1 + static_cast<int>(rng.uniform_int(4))));
  return spec;
}

GradCheckResult gradient_check(const NetworkSpec& spec, std::uint64_t seed, std::size_t steps, std::size_t batch,
                               double tolerance, bool sign_flip) {
  spec.validate();
  Rng rng(derive_seed(seed, "gradient_check"));
  Parameters params = init_parameters(spec, derive_seed(seed, "params"));
  // Move biases off zero so every term is exercised.
  params.for_each_tensor([&](double* d, std::size_t n, bool is_weight) {
    if (!is_weight)
      for (std::size_t i = 0; i < n; ++i) d[i] = 0.2 * (2.0 * rng.uniform() - 1.0);
  });
  const int out = spec.output_size();
  Sequence inputs, coeffs;
  for (std::size_t t = 0; t < steps; ++t) {
    Eigen::MatrixXd x(spec.input_size, static_cast<Eigen::Index>(batch));
    Eigen::MatrixXd c(out, static_cast<Eigen::Index>(batch));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = rng.normal();
    inputs.push_back(std::move(x));
    coeffs.push_back(std::move(c));
  }
  const std::uint64_t dropout_seed = derive_seed(seed, "dropout_mask");

  auto loss_of = [&](const Parameters& p) {
    const auto tr = forward(p, spec, inputs, ForwardMode::kTrain, dropout_seed);
    double s = l2_penalty(p, spec);
    for (std::size_t t = 0; t < steps; ++t) s += tr.output(t).cwiseProduct(coeffs[t]).sum();
    return s;
  };

  const auto trace = forward(params, spec, inputs, ForwardMode::kTrain, dropout_seed);
  const auto analytic = backward(params, spec, trace, coeffs).flatten();

  // Map flat indices back to layers for reporting.
  std::vector<std::size_t> layer_of;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& lp = params.layers[l];
    layer_of.insert(layer_of.end(), static_cast<std::size_t>(lp.w.size() + lp.u.size() + lp.b.size()), l);
  }

  std::vector<double> flat = params.flatten();
  Parameters probe = params;
  GradCheckResult res;
  const double h = 1e-5;
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double orig = flat[i];
    flat[i] = orig + h;
    probe.unflatten(flat);
    const double up = loss_of(probe);
    flat[i] = orig - h;
    probe.unflatten(flat);
    const double down = loss_of(probe);
    flat[i] = orig;
    const double numeric = (up - down) / (2.0 * h);
    const double a = sign_flip ? -analytic[i] : analytic[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
    if (rel > res.max_rel_error || res.checked == 0) {
      res.max_rel_error = rel;
      res.worst_layer = layer_of[i];
      std::size_t first = 0;
      while (layer_of[first] != layer_of[i]) ++first;
      res.worst_index = i - first;
    }
    ++res.checked;
  }
  res.passed = res.max_rel_error <= tolerance;
  return res;
}

}  // namespace dan
