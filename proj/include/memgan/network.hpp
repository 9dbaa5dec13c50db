#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "memgan/crossbar.hpp"
#include "memgan/device.hpp"
#include "memgan/layers.hpp"
#include "memgan/random.hpp"
#include "memgan/topology.hpp"

namespace memgan {

/// Analog non-idealities applied to forward passes.
struct ForwardOptions {
  ReadoutMode mode = ReadoutMode::ideal;
  LeakageNoise leakage{};
  bool training = false;     // enables dropout
  Stream* dropout_rng = nullptr;
};

/// Layer inputs recorded by a forward pass, consumed by backward().
struct ForwardTrace {
  std::vector<Tensor> inputs;
  std::vector<Tensor> dropout_masks;  // one per layer; empty when unused
  Tensor output;
};

/// How a network's crossbars are written.
struct WriteOptions {
  bool quantized = false;
  VariabilityModel variability{};
};

/// A network whose crossbar layers live on memristor arrays.
class Network {
 public:
  Network() = default;

  /// All weights zero (every cell at G_off). `w_max` holds one scale per
  /// crossbar layer.
  Network(NetworkTopology topology, const DeviceSpec& device, const std::vector<double>& w_max, WriteOptions write = {})
      : topology_(std::move(topology)), device_(device) {
    validate(topology_);
    std::size_t k = 0;
    for (std::size_t i = 0; i < topology_.layers.size(); ++i) {
      const auto& l = topology_.layers[i];
      if (!l.has_crossbar()) {
        slot_.push_back(npos);
        continue;
      }
      if (k >= w_max.size()) throw Error(ErrorCategory::config, "network: one w_max per crossbar layer required");
      VariabilityModel var = write.variability;
      var.seed = mix64(write.variability.seed ^ (0x100 + i));
      slot_.push_back(crossbars_.size());
      crossbars_.emplace_back(device_, l.crossbar_rows(), l.crossbar_cols(), w_max[k++], write.quantized, var);
    }
    build_maps();
  }

  const NetworkTopology& topology() const noexcept { return topology_; }
  const DeviceSpec& device() const noexcept { return device_; }
  std::vector<CrossbarArray>& crossbars() noexcept { return crossbars_; }
  const std::vector<CrossbarArray>& crossbars() const noexcept { return crossbars_; }

  /// Crossbar index of layer i, if it has one.
  std::optional<std::size_t> crossbar_of(std::size_t layer) const {
    return slot_[layer] == npos ? std::nullopt : std::optional(slot_[layer]);
  }

  /// Programs every crossbar from a list of weight matrices.
  void program(const std::vector<Matrix>& weights) {
    if (weights.size() != crossbars_.size()) throw Error(ErrorCategory::shape, "network: weight list size mismatch");
    for (std::size_t k = 0; k < crossbars_.size(); ++k) crossbars_[k].program(weights[k]);
  }

  std::vector<Matrix> weights() const {
    std::vector<Matrix> w;
    for (const auto& x : crossbars_) w.push_back(x.weights());
    return w;
  }

  /// Zero gradient buffers shaped like the crossbars.
  std::vector<Matrix> zero_gradients() const {
    std::vector<Matrix> g;
    for (const auto& x : crossbars_) g.emplace_back(x.rows(), x.cols());
    return g;
  }

  Tensor forward(const Tensor& x, const ForwardOptions& opt = {}) const { return forward_traced(x, opt).output; }

  ForwardTrace forward_traced(const Tensor& x, const ForwardOptions& opt = {}) const {
    if (x.size() != element_count(topology_.input_shape()))
      throw Error(ErrorCategory::shape, std::string(to_string(topology_.role)) + ": input " + to_string(x.shape()) +
                                            " does not match " + to_string(topology_.input_shape()));
    ForwardTrace trace;
    Tensor cur = x.reshaped(topology_.input_shape());
    trace.dropout_masks.resize(topology_.layers.size());
    for (std::size_t i = 0; i < topology_.layers.size(); ++i) {
      const auto& l = topology_.layers[i];
      trace.inputs.push_back(cur);
      switch (l.kind) {
        case LayerKind::conv:
        case LayerKind::deconv:
          cur = apply_patches(cur, maps_[i], crossbars_[slot_[i]], opt.mode, opt.leakage);
          break;
        case LayerKind::dense:
          cur = dense(cur, crossbars_[slot_[i]], opt.mode, opt.leakage, l.bias).reshaped(l.out_shape);
          break;
        case LayerKind::meanpool:
          cur = mean_pool(cur, l.kernel_h, l.kernel_w);
          break;
        case LayerKind::relu:
          cur = relu_clip(std::move(cur), l.level);
          break;
        case LayerKind::tanh:
          cur = tanh_act(std::move(cur), l.level);
          break;
        case LayerKind::batchnorm: {
          const auto [m, v] = moments(cur);
          cur = batch_norm(std::move(cur), m, v, kBatchNormEps);
          break;
        }
        case LayerKind::dropout:
          if (opt.training && opt.dropout_rng && l.level > 0.0) {
            Tensor mask = dropout_mask(cur.shape(), l.level, *opt.dropout_rng);
            for (std::size_t j = 0; j < cur.size(); ++j) cur[j] *= mask[j];
            trace.dropout_masks[i] = std::move(mask);
          }
          break;
      }
    }
    trace.output = std::move(cur);
    return trace;
  }

  /// Back-propagates dy through the recorded pass using the arrays' ideal
  /// (effective) weights. Weight gradients are added into `grads` when
  /// given. Returns the gradient with respect to the network input.
  Tensor backward(const ForwardTrace& trace, const Tensor& dy, std::vector<Matrix>* grads) const {
    Tensor g = dy.reshaped(topology_.output_shape());
    for (std::size_t i = topology_.layers.size(); i-- > 0;) {
      const auto& l = topology_.layers[i];
      const Tensor& in = trace.inputs[i];
      switch (l.kind) {
        case LayerKind::conv:
        case LayerKind::deconv: {
          const auto& xbar = crossbars_[slot_[i]];
          Tensor dx(in.shape());
          patches_backward(in, maps_[i], xbar.effective_weights(), xbar.cols(), g, &dx,
                           grads ? &(*grads)[slot_[i]] : nullptr);
          g = std::move(dx);
          break;
        }
        case LayerKind::dense: {
          const auto& xbar = crossbars_[slot_[i]];
          const auto& w = xbar.effective_weights();
          const std::size_t rows = xbar.rows(), cols = xbar.cols();
          Tensor dx(in.shape());
          for (std::size_t r = 0; r < rows; ++r) {
            const bool bias_row = l.bias && r + 1 == rows;
            const double v = bias_row ? kBiasVoltage : in[r];
            const double* wr = w.data() + r * cols;
            if (!bias_row) {
              double s = 0.0;
              for (std::size_t c = 0; c < cols; ++c) s += wr[c] * g[c];
              dx[r] = s;
            }
            if (grads) {
              double* gr = (*grads)[slot_[i]].data().data() + r * cols;
              for (std::size_t c = 0; c < cols; ++c) gr[c] += v * g[c];
            }
          }
          g = std::move(dx);
          break;
        }
        case LayerKind::meanpool:
          g = mean_pool_backward(g, l.kernel_h, l.kernel_w);
          break;
        case LayerKind::relu:
          for (std::size_t j = 0; j < g.size(); ++j)
            if (!(in[j] > 0.0 && in[j] < l.level)) g[j] = 0.0;
          break;
        case LayerKind::tanh:
          for (std::size_t j = 0; j < g.size(); ++j) {
            const double t = std::tanh(in[j] / l.level);
            g[j] *= 1.0 - t * t;
          }
          break;
        case LayerKind::batchnorm: {
          // y = (x - m) / s with m, s the tensor's own moments.
          const auto [m, v] = moments(in);
          const double inv = 1.0 / std::sqrt(v + kBatchNormEps);
          const double n = static_cast<double>(g.size());
          double mean_g = 0.0, mean_gy = 0.0;
          for (std::size_t j = 0; j < g.size(); ++j) {
            const double y = (in[j] - m) * inv;
            mean_g += g[j];
            mean_gy += g[j] * y;
          }
          mean_g /= n;
          mean_gy /= n;
          for (std::size_t j = 0; j < g.size(); ++j) {
            const double y = (in[j] - m) * inv;
            g[j] = (g[j] - mean_g - y * mean_gy) * inv;
          }
          break;
        }
        case LayerKind::dropout:
          if (!trace.dropout_masks[i].empty())
            for (std::size_t j = 0; j < g.size(); ++j) g[j] *= trace.dropout_masks[i][j];
          break;
      }
      g = g.reshaped(in.shape());
    }
    return g;
  }

  static constexpr double kBatchNormEps = 1e-5;

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  static std::pair<double, double> moments(const Tensor& t) {
    double m = 0.0;
    for (double v : t.data()) m += v;
    m /= static_cast<double>(t.size());
    double var = 0.0;
    for (double v : t.data()) var += (v - m) * (v - m);
    return {m, var / static_cast<double>(t.size())};
  }

  void build_maps() {
    maps_.resize(topology_.layers.size());
    for (std::size_t i = 0; i < topology_.layers.size(); ++i) {
      const auto& l = topology_.layers[i];
      if (l.kind == LayerKind::conv) maps_[i] = conv_patch_map(l.in_shape, l);
      if (l.kind == LayerKind::deconv) maps_[i] = deconv_patch_map(l.in_shape, l);
    }
  }

  NetworkTopology topology_;
  DeviceSpec device_{};
  std::vector<CrossbarArray> crossbars_;
  std::vector<std::size_t> slot_;
  std::vector<PatchMap> maps_;
};

}  // namespace memgan
