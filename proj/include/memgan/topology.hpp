#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "memgan/error.hpp"
#include "memgan/layers.hpp"
#include "memgan/tensor.hpp"

namespace memgan {

enum class NetworkRole { generator, discriminator };

inline const char* to_string(NetworkRole r) { return r == NetworkRole::generator ? "generator" : "discriminator"; }

/// Ordered layer list of one network. Shapes chain: each layer's in_shape
/// is the previous layer's out_shape.
struct NetworkTopology {
  NetworkRole role = NetworkRole::generator;
  std::vector<LayerDesc> layers;

  const Shape& input_shape() const { return layers.front().in_shape; }
  const Shape& output_shape() const { return layers.back().out_shape; }

  std::size_t weight_count() const {
    std::size_t n = 0;
    for (const auto& l : layers)
      if (l.has_crossbar()) n += l.crossbar_rows() * l.crossbar_cols();
    return n;
  }
  std::size_t crossbar_layers() const {
    return static_cast<std::size_t>(std::count_if(layers.begin(), layers.end(), [](const LayerDesc& l) { return l.has_crossbar(); }));
  }
  std::size_t max_columns() const {
    std::size_t c = 0;
    for (const auto& l : layers)
      if (l.has_crossbar()) c = std::max(c, l.crossbar_cols());
    return c;
  }
};

/// A matched generator/discriminator pair.
struct GanTopology {
  std::string name;
  NetworkTopology generator;
  NetworkTopology discriminator;

  std::size_t latent_dim() const { return element_count(generator.input_shape()); }
  const Shape& image_shape() const { return generator.output_shape(); }
};

/// Checks shape chaining and per-kind arithmetic.
inline void validate(const NetworkTopology& t) {
  if (t.layers.empty()) throw Error(ErrorCategory::config, "topology: no layers");
  for (std::size_t i = 0; i < t.layers.size(); ++i) {
    const auto& l = t.layers[i];
    const std::string where = std::string(to_string(t.role)) + " layer " + std::to_string(i) + " (" + to_string(l.kind) + ")";
    if (i > 0 && l.in_shape != t.layers[i - 1].out_shape)
      throw Error(ErrorCategory::shape, where + ": input " + to_string(l.in_shape) + " does not chain from " +
                                            to_string(t.layers[i - 1].out_shape));
    if (infer_out_shape(l) != l.out_shape) throw Error(ErrorCategory::shape, where + ": inconsistent output shape");
    if (l.has_crossbar() && l.crossbar_rows() * l.crossbar_cols() == 0)
      throw Error(ErrorCategory::config, where + ": empty crossbar");
    if ((l.kind == LayerKind::relu || l.kind == LayerKind::tanh) && !(l.level > 0.0))
      throw Error(ErrorCategory::config, where + ": activation level must be positive");
    if (l.kind == LayerKind::dropout && !(l.level >= 0.0 && l.level < 1.0))
      throw Error(ErrorCategory::config, where + ": dropout rate must be in [0, 1)");
  }
}

inline void validate(const GanTopology& t) {
  validate(t.generator);
  validate(t.discriminator);
  if (t.generator.output_shape() != t.discriminator.input_shape())
    throw Error(ErrorCategory::shape, "topology: generator output does not match discriminator input");
  if (element_count(t.discriminator.output_shape()) != 1)
    throw Error(ErrorCategory::shape, "topology: discriminator must produce a single output");
}

/// Appends layers while tracking the running shape.
class TopologyBuilder {
 public:
  TopologyBuilder(NetworkRole role, Shape input) : shape_(std::move(input)) { topo_.role = role; }

  /// Bias row on subsequently added crossbar layers.
  TopologyBuilder& with_bias(bool on = true) {
    bias_ = on;
    return *this;
  }
  TopologyBuilder& dense(Shape out) {
    LayerDesc d{.kind = LayerKind::dense, .bias = bias_};
    d.out_shape = std::move(out);
    return add(d);
  }
  TopologyBuilder& conv(std::size_t filters, std::size_t kernel, std::size_t stride = 1, std::size_t padding = 0) {
    return add({.kind = LayerKind::conv, .kernel_h = kernel, .kernel_w = kernel, .filters = filters, .stride = stride,
                .padding = padding, .bias = bias_});
  }
  TopologyBuilder& deconv(std::size_t filters, std::size_t kernel, std::size_t stride = 1, std::size_t padding = 0,
                          std::size_t output_padding = 0) {
    return add({.kind = LayerKind::deconv, .kernel_h = kernel, .kernel_w = kernel, .filters = filters, .stride = stride,
                .padding = padding, .output_padding = output_padding, .bias = bias_});
  }
  TopologyBuilder& meanpool(std::size_t window) {
    return add({.kind = LayerKind::meanpool, .kernel_h = window, .kernel_w = window, .stride = window});
  }
  TopologyBuilder& relu(double v_dd = kDefaultVdd) { return add({.kind = LayerKind::relu, .level = v_dd}); }
  TopologyBuilder& tanh(double v_scale = kDefaultTanhScale) { return add({.kind = LayerKind::tanh, .level = v_scale}); }
  TopologyBuilder& batchnorm() { return add({.kind = LayerKind::batchnorm}); }
  TopologyBuilder& dropout(double rate) { return add({.kind = LayerKind::dropout, .level = rate}); }

  TopologyBuilder& add(LayerDesc d) {
    d.in_shape = shape_;
    d.out_shape = infer_out_shape(d);
    shape_ = d.out_shape;
    topo_.layers.push_back(std::move(d));
    return *this;
  }

  NetworkTopology build() const {
    validate(topo_);
    return topo_;
  }

 private:
  NetworkTopology topo_;
  Shape shape_;
  bool bias_ = false;
};

/// Desk-scale pair: 2 filters of 3x3 per conv stage and one dense layer in
/// each network, 28x28x1 images, 16-dimensional latent.
/// Conv stages use stride 1 with 2x2 mean pooling; deconvs use stride 2,
/// padding 1, output padding 1 (exact doubling).
inline GanTopology reference_small_topology(std::size_t latent_dim = 16) {
  GanTopology t;
  t.name = "reference-small";
  t.generator = TopologyBuilder(NetworkRole::generator, {latent_dim})
                    .with_bias()
                    .dense({7, 7, 2})
                    .relu()
                    .deconv(2, 3, 2, 1, 1)
                    .relu()
                    .deconv(1, 3, 2, 1, 1)
                    .tanh()
                    .build();
  t.discriminator = TopologyBuilder(NetworkRole::discriminator, {28, 28, 1})
                        .with_bias()
                        .conv(2, 3, 1, 1)
                        .relu()
                        .meanpool(2)
                        .conv(2, 3, 1, 1)
                        .relu()
                        .meanpool(2)
                        .dense({1})
                        .build();
  return t;
}

/// Budget-scale pair with 5x5 kernels: generator dense(latent -> 7x7x128),
/// deconv to 64 then 1 channel; discriminator conv 64 then 128 filters with
/// pooling and a dense readout. With latent 200 this totals 1,673,472
/// weights in 6 crossbars.
inline GanTopology reference_full_topology(std::size_t latent_dim = 200) {
  GanTopology t;
  t.name = "reference-full";
  t.generator = TopologyBuilder(NetworkRole::generator, {latent_dim})
                    .dense({7, 7, 128})
                    .relu()
                    .deconv(64, 5, 2, 2, 1)
                    .relu()
                    .deconv(1, 5, 2, 2, 1)
                    .tanh()
                    .build();
  t.discriminator = TopologyBuilder(NetworkRole::discriminator, {28, 28, 1})
                        .conv(64, 5, 1, 2)
                        .relu()
                        .meanpool(2)
                        .conv(128, 5, 1, 2)
                        .relu()
                        .meanpool(2)
                        .dense({1})
                        .build();
  return t;
}

/// Tiny pair on 8x8 images for gradient checks.
inline GanTopology toy_topology() {
  GanTopology t;
  t.name = "toy";
  t.generator = TopologyBuilder(NetworkRole::generator, {4})
                    .dense({2, 2, 2})
                    .relu()
                    .deconv(2, 3, 2, 1, 1)
                    .relu()
                    .deconv(1, 3, 2, 1, 1)
                    .tanh()
                    .build();
  t.discriminator = TopologyBuilder(NetworkRole::discriminator, {8, 8, 1})
                        .conv(2, 3, 1, 1)
                        .relu()
                        .meanpool(2)
                        .conv(2, 3, 1, 1)
                        .relu()
                        .meanpool(2)
                        .dense({1})
                        .build();
  return t;
}

namespace detail {

inline NetworkTopology network_from_json(const nlohmann::json& j, NetworkRole role) {
  std::vector<std::size_t> input = j.at("input").get<std::vector<std::size_t>>();
  TopologyBuilder b(role, input);
  for (const auto& l : j.at("layers")) {
    LayerDesc d;
    d.kind = layer_kind_from(l.at("kind").get<std::string>());
    const std::size_t k = l.value("kernel", std::size_t{0});
    d.kernel_h = l.value("kernel_h", k);
    d.kernel_w = l.value("kernel_w", k);
    d.filters = l.value("filters", std::size_t{0});
    d.stride = l.value("stride", d.kind == LayerKind::meanpool ? d.kernel_h : std::size_t{1});
    d.padding = l.value("padding", std::size_t{0});
    d.output_padding = l.value("output_padding", std::size_t{0});
    d.bias = l.value("bias", false);
    const double default_level = d.kind == LayerKind::relu ? kDefaultVdd : d.kind == LayerKind::tanh ? kDefaultTanhScale : 0.0;
    d.level = l.value("level", default_level);
    if (l.contains("out")) d.out_shape = l.at("out").get<std::vector<std::size_t>>();
    b.add(d);
  }
  return b.build();
}

}  // namespace detail

/// Reads a topology file:
/// {"name": ..., "generator": {"input": [16], "layers": [{"kind": "dense", "out": [7,7,2]}, ...]},
///  "discriminator": {...}}
inline GanTopology load_topology_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCategory::io, "cannot open topology file " + path);
  try {
    const auto j = nlohmann::json::parse(in);
    GanTopology t;
    t.name = j.value("name", path);
    t.generator = detail::network_from_json(j.at("generator"), NetworkRole::generator);
    t.discriminator = detail::network_from_json(j.at("discriminator"), NetworkRole::discriminator);
    validate(t);
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::config, "topology file " + path + ": " + e.what());
  }
}

/// reference-small | reference-full | toy | path to a topology file.
inline GanTopology topology_by_name(const std::string& name, std::size_t latent_dim = 0) {
  if (name == "reference-small") return latent_dim ? reference_small_topology(latent_dim) : reference_small_topology();
  if (name == "reference-full") return latent_dim ? reference_full_topology(latent_dim) : reference_full_topology();
  if (name == "toy") return toy_topology();
  return load_topology_file(name);
}

}  // namespace memgan
