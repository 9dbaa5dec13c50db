#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "memgan/device.hpp"
#include "memgan/network.hpp"
#include "memgan/random.hpp"
#include "memgan/topology.hpp"

namespace memgan {

/// Analog effects switched on for a run; everything off is the exact
/// software network.
struct AnalogEffects {
  bool quantize = false;          // program on the device level grid
  double variability = 0.0;       // sigma_pct of device-to-device spread
  bool loaded_readout = false;    // read columns through the load memristor
  double leakage = 0.0;           // idle-row noise level (fraction of v_write)

  bool operator==(const AnalogEffects&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 1;
  double learning_rate = 0.01;
  AnalogEffects analog{};
  std::uint64_t seed = 1;
  /// Per-layer weight scale w_max as a multiple of the initialization bound.
  double weight_headroom = 2.0;
  /// Initial bias-row weight; positive keeps ReLUs alive on the dark
  /// image background.
  double bias_init = 0.1;

  bool operator==(const TrainConfig&) const = default;
};

inline void validate(const TrainConfig& c) {
  if (c.epochs < 1) throw Error(ErrorCategory::config, "train: epochs must be at least 1");
  if (c.batch_size < 1) throw Error(ErrorCategory::config, "train: batch size must be at least 1");
  if (!(c.learning_rate >= 0.0) || !std::isfinite(c.learning_rate))
    throw Error(ErrorCategory::config, "train: learning rate must be non-negative");
  if (!(c.analog.variability >= 0.0)) throw Error(ErrorCategory::config, "train: variability must be non-negative");
  if (!(c.analog.leakage >= 0.0)) throw Error(ErrorCategory::config, "train: leakage noise must be non-negative");
  if (!(c.weight_headroom > 0.0)) throw Error(ErrorCategory::config, "train: weight headroom must be positive");
}

struct EpochLoss {
  std::size_t epoch = 0;
  double d_loss = 0.0;
  double g_loss = 0.0;

  bool operator==(const EpochLoss&) const = default;
};

/// Random substreams of a run, all derived from one root seed.
struct RunStreams {
  Stream latent;
  Stream leakage;
  Stream dropout;
  Stream shuffle;

  static RunStreams from_seed(std::uint64_t root) {
    return {Stream(substream_seed(root, "noise")), Stream(substream_seed(root, "leakage")),
            Stream(substream_seed(root, "dropout")), Stream(substream_seed(root, "shuffle"))};
  }
};

/// The weight-update unit's high-precision copy of each crossbar layer.
/// Gradient steps accumulate here, clipped to +-w_max, and every update
/// re-programs the arrays from it through the device write model, so steps
/// smaller than a level gap are not lost.
using WeightAccumulator = std::vector<Matrix>;

struct TrainState {
  Network generator;
  Network discriminator;
  WeightAccumulator generator_weights;
  WeightAccumulator discriminator_weights;
  std::size_t epoch = 0;
  /// One event per presented training image.
  std::uint64_t update_events = 0;
  std::vector<EpochLoss> history;
  RunStreams streams;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
/// log(1 + e^x) without overflow.
inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// Voltage range of generated images.
inline double image_scale(const GanTopology& t) {
  const auto& last = t.generator.layers.back();
  return last.kind == LayerKind::tanh ? last.level : 1.0;
}

inline WriteOptions write_options(const TrainConfig& config, std::uint64_t root_seed) {
  return {config.analog.quantize,
          VariabilityModel{config.analog.variability, VariabilityDistribution::multiplicative_gaussian,
                           substream_seed(root_seed, "variability")}};
}

namespace detail {

inline std::pair<std::size_t, std::size_t> fans(const LayerDesc& l) {
  if (l.kind == LayerKind::dense) return {l.crossbar_rows(), l.crossbar_cols()};
  const std::size_t k = l.kernel_h * l.kernel_w;
  return {k * l.in_shape.at(2), k * l.filters};
}

inline Network init_network(const NetworkTopology& topo, const DeviceSpec& device, const TrainConfig& config,
                            Stream& rng, WeightAccumulator& accumulator) {
  std::vector<double> scales;
  std::vector<Matrix> weights;
  for (const auto& l : topo.layers) {
    if (!l.has_crossbar()) continue;
    const auto [fan_in, fan_out] = fans(l);
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(l.crossbar_rows(), l.crossbar_cols());
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    if (l.bias)
      for (double& v : w.row(w.rows() - 1)) v = std::min(config.bias_init, config.weight_headroom * bound);
    weights.push_back(std::move(w));
    scales.push_back(config.weight_headroom * bound);
  }
  Network net(topo, device, scales, write_options(config, config.seed));
  net.program(weights);
  accumulator = std::move(weights);
  return net;
}

}  // namespace detail

/// Fresh training state: Glorot-uniform weights written through the
/// configured device model.
inline TrainState init_state(const GanTopology& topology, const DeviceSpec& device, const TrainConfig& config) {
  validate(topology);
  validate(device);
  validate(config);
  Stream weights(substream_seed(config.seed, "weights"));
  TrainState s;
  s.generator = detail::init_network(topology.generator, device, config, weights, s.generator_weights);
  s.discriminator = detail::init_network(topology.discriminator, device, config, weights, s.discriminator_weights);
  s.streams = RunStreams::from_seed(config.seed);
  return s;
}

inline ForwardOptions forward_options(const TrainConfig& config, TrainState& state, bool training) {
  ForwardOptions o;
  o.mode = config.analog.loaded_readout ? ReadoutMode::loaded : ReadoutMode::ideal;
  if (config.analog.leakage > 0.0) o.leakage = {config.analog.leakage, &state.streams.leakage};
  o.training = training;
  o.dropout_rng = &state.streams.dropout;
  return o;
}

inline Tensor generator_forward(const Tensor& z, const Network& generator, const ForwardOptions& opt = {}) {
  return generator.forward(z, opt);
}

/// Discriminator pre-activation (the dense layer's single output).
inline double discriminator_logit(const Tensor& image, const Network& discriminator, const ForwardOptions& opt = {}) {
  if (image.shape() != discriminator.topology().input_shape())
    throw Error(ErrorCategory::shape, "discriminator: image " + to_string(image.shape()) + " does not match " +
                                          to_string(discriminator.topology().input_shape()));
  return discriminator.forward(image, opt)[0];
}

/// Probability in (0, 1) that the image is real.
inline double discriminator_forward(const Tensor& image, const Network& discriminator, const ForwardOptions& opt = {}) {
  return sigmoid(discriminator_logit(image, discriminator, opt));
}

inline Tensor sample_latent(std::size_t latent_dim, Stream& rng) {
  Tensor z({latent_dim});
  for (double& v : z.data()) v = rng.normal();
  return z;
}

/// accumulator -= lr * scale * grad (clipped to each layer's +-w_max), then
/// re-programs the arrays from the accumulator.
inline void apply_gradients(Network& net, WeightAccumulator& accumulator, const std::vector<Matrix>& grads,
                            double learning_rate, double scale) {
  auto& xbars = net.crossbars();
  if (accumulator.size() != xbars.size()) throw Error(ErrorCategory::shape, "weight accumulator does not match network");
  for (std::size_t k = 0; k < xbars.size(); ++k) {
    const double w_max = xbars[k].w_max();
    bool changed = false;
    for (std::size_t i = 0; i < accumulator[k].size(); ++i) {
      const double step = learning_rate * scale * grads[k].data()[i];
      if (!std::isfinite(step)) throw Error(ErrorCategory::numeric, "training diverged");
      if (step == 0.0) continue;
      double& w = accumulator[k].data()[i];
      w = std::clamp(w - step, -w_max, w_max);
      changed = true;
    }
    if (changed) xbars[k].program(accumulator[k]);
  }
}

struct StepLoss {
  double d_loss = 0.0;
  double g_loss = 0.0;
};

/// One adversarial update over a batch of real images (values in [-1, 1]).
///
/// The discriminator minimizes BCE on real (label 1) and generated
/// (label 0) images; the generator then minimizes -log D(G(z)) through the
/// frozen discriminator. Forward passes carry the configured analog effects;
/// gradients are exact back-propagation through the arrays' weights, and the
/// updated accumulator weights are written back through the device model.
inline StepLoss train_step(std::span<const Tensor> real_batch, TrainState& state, const TrainConfig& config) {
  if (real_batch.empty()) throw Error(ErrorCategory::config, "train_step: empty batch");
  const std::size_t latent_dim = element_count(state.generator.topology().input_shape());
  const auto& last = state.generator.topology().layers.back();
  const double v_scale = last.kind == LayerKind::tanh ? last.level : 1.0;
  const double inv_n = 1.0 / static_cast<double>(real_batch.size());
  const ForwardOptions fwd = forward_options(config, state, true);

  StepLoss loss;
  auto d_grads = state.discriminator.zero_gradients();
  for (const Tensor& image : real_batch) {
    Tensor x = image.reshaped(state.discriminator.topology().input_shape());
    for (double& v : x.data()) v *= v_scale;
    auto trace = state.discriminator.forward_traced(x, fwd);
    const double s = trace.output[0];
    loss.d_loss += softplus(-s) * inv_n;
    state.discriminator.backward(trace, Tensor({1}, {sigmoid(s) - 1.0}), &d_grads);
  }
  for (std::size_t b = 0; b < real_batch.size(); ++b) {
    const Tensor fake = state.generator.forward(sample_latent(latent_dim, state.streams.latent), fwd);
    auto trace = state.discriminator.forward_traced(fake, fwd);
    const double s = trace.output[0];
    loss.d_loss += softplus(s) * inv_n;
    state.discriminator.backward(trace, Tensor({1}, {sigmoid(s)}), &d_grads);
  }
  apply_gradients(state.discriminator, state.discriminator_weights, d_grads, config.learning_rate, inv_n);

  auto g_grads = state.generator.zero_gradients();
  for (std::size_t b = 0; b < real_batch.size(); ++b) {
    auto g_trace = state.generator.forward_traced(sample_latent(latent_dim, state.streams.latent), fwd);
    auto d_trace = state.discriminator.forward_traced(g_trace.output, fwd);
    const double s = d_trace.output[0];
    loss.g_loss += softplus(-s) * inv_n;
    const Tensor d_image = state.discriminator.backward(d_trace, Tensor({1}, {sigmoid(s) - 1.0}), nullptr);
    state.generator.backward(g_trace, d_image, &g_grads);
  }
  apply_gradients(state.generator, state.generator_weights, g_grads, config.learning_rate, inv_n);

  if (!std::isfinite(loss.d_loss) || !std::isfinite(loss.g_loss))
    throw Error(ErrorCategory::numeric, "training diverged");
  state.update_events += real_batch.size();
  return loss;
}

/// One pass over the dataset in a seeded shuffled order.
inline EpochLoss train_epoch(std::span<const Tensor> dataset, TrainState& state, const TrainConfig& config) {
  if (dataset.empty()) throw Error(ErrorCategory::config, "train: empty dataset");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[state.streams.shuffle.below(i)]);

  EpochLoss total{state.epoch + 1, 0.0, 0.0};
  std::vector<Tensor> batch;
  std::size_t steps = 0;
  for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
    batch.clear();
    for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
      batch.push_back(dataset[order[i]]);
    const StepLoss l = train_step(batch, state, config);
    total.d_loss += l.d_loss;
    total.g_loss += l.g_loss;
    ++steps;
  }
  total.d_loss /= static_cast<double>(steps);
  total.g_loss /= static_cast<double>(steps);
  state.epoch += 1;
  state.history.push_back(total);
  return total;
}

/// Trains for config.epochs, calling on_epoch after every epoch.
inline void train(std::span<const Tensor> dataset, TrainState& state, const TrainConfig& config,
                  const std::function<void(const TrainState&, const EpochLoss&)>& on_epoch = {}) {
  validate(config);
  while (state.epoch < config.epochs) {
    const EpochLoss l = train_epoch(dataset, state, config);
    if (on_epoch) on_epoch(state, l);
  }
}

/// n generated images (in volts) from latent draws fixed by `seed`.
inline std::vector<Tensor> generate_samples(std::size_t n, const Network& generator, std::uint64_t seed,
                                            const ForwardOptions& opt = {}) {
  Stream rng(substream_seed(seed, "samples"));
  const std::size_t latent_dim = element_count(generator.topology().input_shape());
  std::vector<Tensor> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(generator.forward(sample_latent(latent_dim, rng), opt));
  return out;
}

/// Generated images mapped back from volts to the dataset's [-1, 1] range.
inline std::vector<Tensor> to_unit_range(std::vector<Tensor> images, double v_scale) {
  for (auto& t : images)
    for (double& v : t.data()) v /= v_scale;
  return images;
}

}  // namespace memgan
