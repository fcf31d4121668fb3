#pragma once

// Sigmoid multilayer perceptron trained by full-batch steepest descent.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pocr/error.hpp"

namespace pocr {

// ---------------------------------------------------------------------------
// Error measures

// Observed minus forecast.
constexpr double error(double observed, double forecast) noexcept { return observed - forecast; }

inline double mse(std::span<const double> errors) {
  if (errors.empty()) throw InvalidArgument("mse: empty error sequence");
  double s = 0.0;
  for (double e : errors) s += e * e;
  return s / static_cast<double>(errors.size());
}

inline double mae(std::span<const double> errors) {
  if (errors.empty()) throw InvalidArgument("mae: empty error sequence");
  double s = 0.0;
  for (double e : errors) s += std::abs(e);
  return s / static_cast<double>(errors.size());
}

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
  std::size_t n = 0;  // number of (sample, output) error terms
};

// ---------------------------------------------------------------------------
// Network

// Clamped to the open interval (0, 1) so saturated units never emit exact 0 or 1.
inline double sigmoid(double x) noexcept {
  constexpr double kLo = 0x1.0p-1022;
  constexpr double kHi = 1.0 - 0x1.0p-53;
  return std::clamp(1.0 / (1.0 + std::exp(-x)), kLo, kHi);
}

// Fully connected layer; weights are row-major, one row per neuron.
struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out) : inputs(in), outputs(out), weights(in * out, 0.0), bias(out, 0.0) {}

  double& weight(std::size_t neuron, std::size_t input) { return weights[neuron * inputs + input]; }
  double weight(std::size_t neuron, std::size_t input) const { return weights[neuron * inputs + input]; }
  std::span<const double> row(std::size_t neuron) const { return {weights.data() + neuron * inputs, inputs}; }

  bool same_shape(const DenseLayer& o) const { return inputs == o.inputs && outputs == o.outputs; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

class Mlp {
 public:
  Mlp() = default;

  // All weights and biases zero.
  explicit Mlp(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw InvalidArgument("an MLP needs at least 2 layers");
    for (auto s : sizes_) {
      if (s == 0) throw InvalidArgument("layer sizes must be >= 1");
    }
    for (std::size_t l = 1; l < sizes_.size(); ++l) layers_.emplace_back(sizes_[l - 1], sizes_[l]);
  }

  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }

  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  bool all_finite() const {
    for (const auto& l : layers_) {
      for (double w : l.weights) if (!std::isfinite(w)) return false;
      for (double b : l.bias) if (!std::isfinite(b)) return false;
    }
    return true;
  }

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<DenseLayer> layers_;
};

// Same shape as the network it was computed for.
struct Gradient {
  std::vector<DenseLayer> layers;

  static Gradient zeros_like(const Mlp& net) {
    Gradient g;
    for (const auto& l : net.layers()) g.layers.emplace_back(l.inputs, l.outputs);
    return g;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& l : layers) {
      for (double w : l.weights) m = std::max(m, std::abs(w));
      for (double b : l.bias) m = std::max(m, std::abs(b));
    }
    return m;
  }

  bool congruent(const Mlp& net) const {
    if (layers.size() != net.layers().size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (!layers[i].same_shape(net.layers()[i])) return false;
    }
    return true;
  }
};

// Weights uniform in +-1/sqrt(fan_in), biases zero. mt19937_64 output is
// fully specified, and the uniform mapping is done by hand, so the result is
// the same on every platform.
inline Mlp new_network(std::vector<std::size_t> layer_sizes, std::uint64_t seed) {
  Mlp net(std::move(layer_sizes));
  std::mt19937_64 gen(seed);
  for (auto& layer : net.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.inputs));
    for (double& w : layer.weights) {
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;  // [0, 1)
      w = (2.0 * u - 1.0) * bound;
    }
  }
  return net;
}

namespace detail {

// Four independent partial sums, combined in a fixed order.
inline double dot(const double* a, const double* b, std::size_t n) noexcept {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

inline void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

inline void layer_forward(const DenseLayer& layer, const double* in, double* out) noexcept {
  for (std::size_t j = 0; j < layer.outputs; ++j) {
    out[j] = sigmoid(layer.bias[j] + dot(layer.weights.data() + j * layer.inputs, in, layer.inputs));
  }
}

}  // namespace detail

// Activations of every layer; [0] is the input, back() the network output.
using Activations = std::vector<std::vector<double>>;

inline Activations forward(const Mlp& net, std::span<const double> input) {
  if (input.size() != net.input_size()) {
    throw InvalidArgument("forward: input has " + std::to_string(input.size()) + " values, network expects " +
                          std::to_string(net.input_size()));
  }
  Activations acts;
  acts.reserve(net.layers().size() + 1);
  acts.emplace_back(input.begin(), input.end());
  for (const auto& layer : net.layers()) {
    std::vector<double> out(layer.outputs);
    detail::layer_forward(layer, acts.back().data(), out.data());
    acts.push_back(std::move(out));
  }
  return acts;
}

inline std::vector<double> predict(const Mlp& net, std::span<const double> input) {
  return std::move(forward(net, input).back());
}

// One supervised pair; the target is usually a CodeWord's bits.
struct Example {
  std::vector<double> input;
  std::vector<double> target;
};

struct BatchGradient {
  Gradient gradient;  // mean over the batch of per-sample gradients
  double loss = 0.0;  // mean over the batch of 1/2 * sum_k (t_k - o_k)^2
  Metrics metrics;    // over all samples and outputs
};

namespace detail {

inline void check_batch(const Mlp& net, std::span<const Example> batch) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  for (const auto& ex : batch) {
    if (ex.input.size() != net.input_size() || ex.target.size() != net.output_size()) {
      throw InvalidArgument("batch example dimensions do not match the network");
    }
  }
}

}  // namespace detail

// Backpropagation of the per-sample loss 1/2 * sum (t - o)^2. Samples are
// accumulated strictly in index order, so the result is bit-reproducible.
inline BatchGradient batch_gradient(const Mlp& net, std::span<const Example> batch) {
  detail::check_batch(net, batch);
  const auto& layers = net.layers();
  const std::size_t depth = layers.size();

  BatchGradient out;
  out.gradient = Gradient::zeros_like(net);

  std::vector<std::vector<double>> acts(depth + 1);
  std::vector<std::vector<double>> deltas(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    acts[l + 1].resize(layers[l].outputs);
    deltas[l].resize(layers[l].outputs);
  }

  double sq = 0.0;
  double ab = 0.0;
  for (const auto& ex : batch) {
    const double* in = ex.input.data();
    for (std::size_t l = 0; l < depth; ++l) {
      detail::layer_forward(layers[l], l == 0 ? in : acts[l].data(), acts[l + 1].data());
    }

    // Output layer: (o - t) * o * (1 - o).
    const auto& o = acts[depth];
    auto& d_out = deltas[depth - 1];
    for (std::size_t k = 0; k < o.size(); ++k) {
      const double e = ex.target[k] - o[k];
      sq += e * e;
      ab += std::abs(e);
      d_out[k] = -e * o[k] * (1.0 - o[k]);
    }

    for (std::size_t l = depth - 1; l > 0; --l) {
      const auto& layer = layers[l];
      auto& d_prev = deltas[l - 1];
      std::fill(d_prev.begin(), d_prev.end(), 0.0);
      for (std::size_t k = 0; k < layer.outputs; ++k) {
        detail::axpy(deltas[l][k], layer.weights.data() + k * layer.inputs, d_prev.data(), layer.inputs);
      }
      const auto& a = acts[l];
      for (std::size_t j = 0; j < d_prev.size(); ++j) d_prev[j] *= a[j] * (1.0 - a[j]);
    }

    for (std::size_t l = 0; l < depth; ++l) {
      auto& g = out.gradient.layers[l];
      const double* prev = l == 0 ? in : acts[l].data();
      for (std::size_t j = 0; j < g.outputs; ++j) {
        const double d = deltas[l][j];
        g.bias[j] += d;
        if (d != 0.0) detail::axpy(d, prev, g.weights.data() + j * g.inputs, g.inputs);
      }
    }
  }

  const double n = static_cast<double>(batch.size());
  for (auto& g : out.gradient.layers) {
    for (double& w : g.weights) w /= n;
    for (double& b : g.bias) b /= n;
  }
  const std::size_t terms = batch.size() * net.output_size();
  out.loss = 0.5 * sq / n;
  out.metrics = {sq / static_cast<double>(terms), ab / static_cast<double>(terms), terms};
  return out;
}

// Mean over the batch of 1/2 * sum (t - o)^2, by forward passes only.
inline double batch_loss(const Mlp& net, std::span<const Example> batch) {
  detail::check_batch(net, batch);
  double total = 0.0;
  for (const auto& ex : batch) {
    const auto out = predict(net, ex.input);
    double s = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      const double e = ex.target[k] - out[k];
      s += e * e;
    }
    total += 0.5 * s;
  }
  return total / static_cast<double>(batch.size());
}

namespace detail {

inline void step_in_place(Mlp& net, const Gradient& grad, double learning_rate) {
  for (std::size_t l = 0; l < grad.layers.size(); ++l) {
    auto& layer = net.layers()[l];
    const auto& g = grad.layers[l];
    for (std::size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] -= learning_rate * g.weights[i];
    for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= learning_rate * g.bias[i];
  }
}

}  // namespace detail

// w <- w - learning_rate * g, returned as a new network.
inline Mlp apply_step(const Mlp& net, const Gradient& grad, double learning_rate) {
  if (!grad.congruent(net)) throw InvalidArgument("apply_step: gradient shape does not match network");
  Mlp next = net;
  detail::step_in_place(next, grad, learning_rate);
  return next;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  double learning_rate = 0.5;
  std::size_t max_epochs = 900;
  double mse_tolerance = 0.001;
  double grad_tolerance = 1e-6;
  std::uint64_t seed = 42;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InvalidArgument("learning rate must be > 0");
    if (max_epochs < 1) throw InvalidArgument("max_epochs must be >= 1");
    if (!(mse_tolerance >= 0.0)) throw InvalidArgument("mse tolerance must be >= 0");
    if (!(grad_tolerance >= 0.0)) throw InvalidArgument("gradient tolerance must be >= 0");
  }
};

enum class StopReason { kMaxEpochs, kMseTolerance, kGradTolerance };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::kMaxEpochs: return "max-epochs";
    case StopReason::kMseTolerance: return "mse-tolerance";
    case StopReason::kGradTolerance: return "grad-tolerance";
  }
  return "?";
}

struct TrainResult {
  Mlp net;
  std::vector<Metrics> history;  // one entry per epoch run
  StopReason stop_reason = StopReason::kMaxEpochs;
};

// Called once per epoch with the metrics measured at the start of the epoch
// and the network as it stands at the end of it.
using EpochObserver = std::function<void(std::size_t epoch, const Metrics&, const Mlp&)>;

// One full-batch gradient and at most one step per epoch. An epoch first
// measures MSE and the gradient, stops if MSE <= mse_tolerance or the
// largest gradient entry <= grad_tolerance, and otherwise steps. The epoch
// counter stops the run after max_epochs steps.
inline TrainResult train(Mlp net, std::span<const Example> dataset, const TrainConfig& config,
                         const EpochObserver& observer = {}) {
  config.validate();
  if (dataset.empty()) throw InvalidArgument("train: empty dataset");
  detail::check_batch(net, dataset);

  TrainResult result;
  result.history.reserve(config.max_epochs);
  for (std::size_t epoch = 1;; ++epoch) {
    auto bg = batch_gradient(net, dataset);
    if (!std::isfinite(bg.loss) || !std::isfinite(bg.metrics.mse)) throw DivergedError(epoch);
    result.history.push_back(bg.metrics);

    std::optional<StopReason> stop;
    if (bg.metrics.mse <= config.mse_tolerance) {
      stop = StopReason::kMseTolerance;
    } else if (bg.gradient.max_abs() <= config.grad_tolerance) {
      stop = StopReason::kGradTolerance;
    } else {
      detail::step_in_place(net, bg.gradient, config.learning_rate);
      if (!net.all_finite()) throw DivergedError(epoch);
      if (epoch >= config.max_epochs) stop = StopReason::kMaxEpochs;
    }
    if (observer) observer(epoch, bg.metrics, net);
    if (stop) {
      result.stop_reason = *stop;
      break;
    }
  }
  result.net = std::move(net);
  return result;
}

// ---------------------------------------------------------------------------
// Gradient checking

// Largest |analytic - numeric| / max(1, |analytic|, |numeric|) over all
// parameters, numeric by central differences of batch_loss with step h.
// `analytic` maps (net, batch) to a Gradient; swapping it out lets a test
// inject a faulty backprop.
template <typename AnalyticFn>
double grad_check(const Mlp& net, std::span<const Example> batch, double h, AnalyticFn&& analytic) {
  if (!(h > 0.0)) throw InvalidArgument("grad_check: step must be > 0");
  const Gradient g = analytic(net, batch);
  if (!g.congruent(net)) throw InvalidArgument("grad_check: analytic gradient has the wrong shape");

  Mlp probe = net;
  double worst = 0.0;
  auto check = [&](double& param, double a) {
    const double saved = param;
    param = saved + h;
    const double up = batch_loss(probe, batch);
    param = saved - h;
    const double down = batch_loss(probe, batch);
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double dev = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
    worst = std::max(worst, dev);
  };
  for (std::size_t l = 0; l < probe.layers().size(); ++l) {
    auto& layer = probe.layers()[l];
    for (std::size_t i = 0; i < layer.weights.size(); ++i) check(layer.weights[i], g.layers[l].weights[i]);
    for (std::size_t i = 0; i < layer.bias.size(); ++i) check(layer.bias[i], g.layers[l].bias[i]);
  }
  return worst;
}

inline double grad_check(const Mlp& net, std::span<const Example> batch, double h = 1e-5) {
  return grad_check(net, batch, h,
                    [](const Mlp& n, std::span<const Example> b) { return batch_gradient(n, b).gradient; });
}

struct GradCheckSuiteResult {
  std::size_t cases = 0;
  double max_deviation = 0.0;           // analytic backprop, worst case
  double negative_deviation = 0.0;      // sign-flipped backprop, max over cases
  std::size_t negatives_flagged = 0;    // cases whose flipped deviation exceeds `flag_above`
};

// Random topologies up to [10, 8, 6] (with or without the hidden layer),
// 1-4 samples of inputs in [-5, 5] and 0/1 targets. Each case also checks a
// sign-flipped backprop, which a working checker must flag.
inline GradCheckSuiteResult gradcheck_suite(std::size_t cases, std::uint64_t seed, double h = 1e-5,
                                            double flag_above = 1e-6) {
  GradCheckSuiteResult res;
  res.cases = cases;
  std::mt19937_64 gen(seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(gen() % (hi - lo + 1)); };
  auto unit = [&] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
  for (std::size_t k = 0; k < cases; ++k) {
    std::vector<std::size_t> sizes{pick(1, 10)};
    if (gen() & 1u) sizes.push_back(pick(1, 8));
    sizes.push_back(pick(1, 6));
    const Mlp net = new_network(sizes, gen());
    std::vector<Example> batch(pick(1, 4));
    for (auto& ex : batch) {
      for (std::size_t i = 0; i < sizes.front(); ++i) ex.input.push_back(10.0 * unit() - 5.0);
      for (std::size_t i = 0; i < sizes.back(); ++i) ex.target.push_back(static_cast<double>(gen() & 1u));
    }
    res.max_deviation = std::max(res.max_deviation, grad_check(net, batch, h));
    const double flipped = grad_check(net, batch, h, [](const Mlp& n, std::span<const Example> b) {
      Gradient g = batch_gradient(n, b).gradient;
      for (auto& l : g.layers) {
        for (double& w : l.weights) w = -w;
        for (double& v : l.bias) v = -v;
      }
      return g;
    });
    res.negative_deviation = std::max(res.negative_deviation, flipped);
    res.negatives_flagged += flipped > flag_above;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Model file
//
//   PMLP1
//   sizes <n0> <n1> ... <nk>
//   activation sigmoid
//   layer <l>             (l = 1..k)
//   <bias> <w_1> ... <w_n(l-1)>   one line per neuron
//
// Numbers use 17 significant digits so doubles round-trip exactly.

inline constexpr std::string_view kModelMagic = "PMLP1";

namespace detail {

inline void append_double(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

class LineCursor {
 public:
  explicit LineCursor(std::string_view text) : text_(text) {}

  // Next line without its terminator; throws at end of input.
  std::string_view next(const char* expecting) {
    if (pos_ >= text_.size()) {
      throw ParseError("line " + std::to_string(line_ + 1) + ": unexpected end of file, expected " + expecting,
                       line_ + 1);
    }
    std::size_t end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    std::string_view line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++line_;
    return line;
  }

  bool only_blank_left() const {
    return text_.find_first_not_of(" \t\r\n", std::min(pos_, text_.size())) == std::string_view::npos;
  }

  std::size_t line() const noexcept { return line_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("line " + std::to_string(line_) + ": " + msg, line_);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && p == tok.data() + tok.size();
}

}  // namespace detail

inline std::string save_model(const Mlp& net) {
  std::string out(kModelMagic);
  out += "\nsizes";
  for (auto s : net.layer_sizes()) out += ' ' + std::to_string(s);
  out += "\nactivation sigmoid\n";
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    out += "layer " + std::to_string(l + 1) + '\n';
    for (std::size_t j = 0; j < layer.outputs; ++j) {
      detail::append_double(out, layer.bias[j]);
      for (double w : layer.row(j)) {
        out += ' ';
        detail::append_double(out, w);
      }
      out += '\n';
    }
  }
  return out;
}

inline Mlp load_model(std::string_view text) {
  detail::LineCursor cur(text);
  if (cur.next("header") != kModelMagic) cur.fail("unsupported model version (expected PMLP1)");

  auto toks = detail::split_ws(cur.next("sizes"));
  if (toks.empty() || toks[0] != "sizes") cur.fail("expected 'sizes'");
  std::vector<std::size_t> sizes;
  for (std::size_t i = 1; i < toks.size(); ++i) {
    std::size_t v = 0;
    if (!detail::parse_number(toks[i], v) || v == 0 || v > (1u << 24)) cur.fail("bad layer size");
    sizes.push_back(v);
  }
  if (sizes.size() < 2) cur.fail("dimension inconsistency: fewer than 2 layers");

  toks = detail::split_ws(cur.next("activation"));
  if (toks.size() != 2 || toks[0] != "activation" || toks[1] != "sigmoid") cur.fail("expected 'activation sigmoid'");

  Mlp net(sizes);
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto& layer = net.layers()[l];
    toks = detail::split_ws(cur.next("layer header"));
    std::size_t index = 0;
    if (toks.size() != 2 || toks[0] != "layer" || !detail::parse_number(toks[1], index) || index != l + 1) {
      cur.fail("expected 'layer " + std::to_string(l + 1) + "'");
    }
    for (std::size_t j = 0; j < layer.outputs; ++j) {
      toks = detail::split_ws(cur.next("neuron weights"));
      if (toks.size() != layer.inputs + 1) {
        cur.fail("dimension inconsistency: expected " + std::to_string(layer.inputs + 1) + " values, found " +
                 std::to_string(toks.size()));
      }
      for (std::size_t i = 0; i < toks.size(); ++i) {
        double v = 0.0;
        if (!detail::parse_number(toks[i], v)) cur.fail("malformed number '" + std::string(toks[i]) + "'");
        if (!std::isfinite(v)) cur.fail("non-finite value");
        if (i == 0) {
          layer.bias[j] = v;
        } else {
          layer.weight(j, i - 1) = v;
        }
      }
    }
  }
  if (!cur.only_blank_left()) {
    throw ParseError("line " + std::to_string(cur.line() + 1) + ": trailing data after last layer", cur.line() + 1);
  }
  return net;
}

}  // namespace pocr
