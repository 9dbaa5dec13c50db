#include <gtest/gtest.h>

#include <cmath>

#include "memgan/gan.hpp"
#include "memgan/network.hpp"
#include "oracles.hpp"

using namespace memgan;

namespace {

std::vector<Matrix> random_weights(const NetworkTopology& t, Stream& rng, double scale) {
  std::vector<Matrix> w;
  for (const auto& l : t.layers) {
    if (!l.has_crossbar()) continue;
    Matrix m(l.crossbar_rows(), l.crossbar_cols());
    for (double& v : m.data()) v = rng.uniform(-scale, scale);
    w.push_back(std::move(m));
  }
  return w;
}

Network make_network(const NetworkTopology& t, const std::vector<Matrix>& w, double w_max, WriteOptions opt = {}) {
  Network n(t, DeviceSpec{}, std::vector<double>(w.size(), w_max), opt);
  n.program(w);
  return n;
}

Tensor random_input(const Shape& s, Stream& rng, double lo, double hi) {
  Tensor t(s);
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

// Weight and input gradients of L = <r, f(x)> against central differences.
void gradient_check(const NetworkTopology& t, std::uint64_t seed, double in_lo, double in_hi) {
  Stream rng(seed);
  auto w = random_weights(t, rng, 0.5);
  const Network net = make_network(t, w, 4.0);
  const Tensor x = random_input(t.input_shape(), rng, in_lo, in_hi);
  const Tensor r = random_input(t.output_shape(), rng, -1.0, 1.0);
  const auto loss = [&](const Network& n, const Tensor& in) { return dot(n.forward(in).values(), r.values()); };

  auto grads = net.zero_gradients();
  const Tensor dx = net.backward(net.forward_traced(x), r, &grads);

  const double h = 1e-5;
  for (std::size_t k = 0; k < w.size(); ++k)
    for (std::size_t i = 0; i < w[k].size(); ++i) {
      auto wp = w, wm = w;
      wp[k].data()[i] += h;
      wm[k].data()[i] -= h;
      const double fd = (loss(make_network(t, wp, 4.0), x) - loss(make_network(t, wm, 4.0), x)) / (2 * h);
      EXPECT_LT(rel_err(fd, grads[k].data()[i]), 1e-4) << "crossbar " << k << " cell " << i;
    }
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (loss(net, xp) - loss(net, xm)) / (2 * h);
    EXPECT_LT(rel_err(fd, dx[i]), 1e-4) << "input " << i;
  }
}

}  // namespace

TEST(Network, ForwardMatchesSoftwareOracle) {
  Stream rng(1);
  for (const auto& topo : {reference_small_topology(), toy_topology()}) {
    for (const auto* t : {&topo.generator, &topo.discriminator}) {
      const auto w = random_weights(*t, rng, 0.4);
      const Network net = make_network(*t, w, 1.0);
      const Tensor x = random_input(t->input_shape(), rng, -0.9, 0.9);
      const Tensor got = net.forward(x);
      const Tensor want = oracle::forward(*t, w, x);
      ASSERT_EQ(got.shape(), want.shape());
      for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-9);
    }
  }
}

TEST(Network, QuantizedForwardUsesProgrammedWeights) {
  Stream rng(2);
  const auto t = toy_topology().discriminator;
  const auto w = random_weights(t, rng, 0.4);
  DeviceSpec d;
  d.n_levels = 8;
  Network net(t, d, std::vector<double>(w.size(), 1.0), WriteOptions{true, {}});
  net.program(w);
  const Tensor x = random_input(t.input_shape(), rng, -0.9, 0.9);
  EXPECT_NEAR(net.forward(x)[0], oracle::forward(t, net.weights(), x)[0], 1e-12);
  EXPECT_GT(std::abs(net.forward(x)[0] - oracle::forward(t, w, x)[0]), 0.0);
}

TEST(Network, GradientCheckToyDiscriminator) { gradient_check(toy_topology().discriminator, 3, -0.9, 0.9); }
TEST(Network, GradientCheckToyGenerator) { gradient_check(toy_topology().generator, 4, -1.0, 1.0); }
TEST(Network, GradientCheckWithBiasRows) {
  const auto t = TopologyBuilder(NetworkRole::discriminator, {6, 6, 1})
                     .with_bias()
                     .conv(2, 3, 1, 1)
                     .relu()
                     .meanpool(2)
                     .dense({2})
                     .build();
  gradient_check(t, 5, -0.9, 0.9);
  const auto g = TopologyBuilder(NetworkRole::generator, {3}).with_bias().dense({2, 2, 2}).deconv(1, 3, 2, 1, 1).tanh().build();
  gradient_check(g, 6, -1.0, 1.0);
}

TEST(Network, GradientCheckBatchNorm) {
  const auto t = TopologyBuilder(NetworkRole::generator, {3}).dense({2, 2, 2}).batchnorm().deconv(1, 3, 2, 1, 1).build();
  gradient_check(t, 7, -1.0, 1.0);
}

TEST(Network, ZeroWeightsGiveZeroImageAndHalfScore) {
  const auto topo = toy_topology();
  const Network g(topo.generator, DeviceSpec{}, std::vector<double>(topo.generator.crossbar_layers(), 1.0));
  const Tensor img = g.forward(Tensor({topo.latent_dim()}));
  EXPECT_EQ(img.shape(), (Shape{8, 8, 1}));
  for (double v : img.data()) EXPECT_EQ(v, 0.0);
  const Network d(topo.discriminator, DeviceSpec{}, std::vector<double>(topo.discriminator.crossbar_layers(), 1.0));
  EXPECT_EQ(discriminator_forward(img, d), 0.5);
}

TEST(Network, GeneratorOutputShapeAndRange) {
  Stream rng(8);
  const auto topo = reference_small_topology();
  const auto w = random_weights(topo.generator, rng, 1.0);
  for (auto mode : {ReadoutMode::ideal, ReadoutMode::loaded}) {
    const Network g = make_network(topo.generator, w, 1.0);
    ForwardOptions opt;
    opt.mode = mode;
    for (int i = 0; i < 100; ++i) {
      Tensor z = random_input({16}, rng, -3.0, 3.0);
      const Tensor img = g.forward(z, opt);
      ASSERT_EQ(img.shape(), (Shape{28, 28, 1}));
      for (double v : img.data()) EXPECT_LE(std::abs(v), kDefaultTanhScale);
    }
  }
}

TEST(Network, ActivationsStayWithinSupply) {
  Stream rng(9);
  const auto t = reference_small_topology().discriminator;
  const auto w = random_weights(t, rng, 2.0);
  const Network d = make_network(t, w, 2.0);
  ForwardOptions opt;
  opt.mode = ReadoutMode::loaded;
  const auto trace = d.forward_traced(random_input({28, 28, 1}, rng, -1.8, 1.8), opt);
  for (std::size_t i = 0; i < t.layers.size(); ++i)
    if (i > 0 && t.layers[i - 1].kind == LayerKind::relu)
      for (double v : trace.inputs[i].data()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, kDefaultVdd);
      }
}

TEST(Network, DiscriminatorScoreInOpenInterval) {
  Stream rng(10);
  const auto t = reference_small_topology().discriminator;
  const Network d = make_network(t, random_weights(t, rng, 0.5), 1.0);
  for (int i = 0; i < 50; ++i) {
    const double s = discriminator_forward(random_input({28, 28, 1}, rng, -0.9, 0.9), d);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
  }
  EXPECT_THROW(discriminator_forward(Tensor({27, 28, 1}), d), Error);
}

TEST(Network, DropoutOnlyInTraining) {
  const auto t = TopologyBuilder(NetworkRole::discriminator, {8}).dropout(0.5).dense({1}).build();
  Network n(t, DeviceSpec{}, {1.0});
  n.program({Matrix(8, 1, 1.0)});
  const Tensor x({8}, 1.0);
  EXPECT_NEAR(n.forward(x)[0], 8.0, 1e-12);
  Stream rng(3);
  ForwardOptions opt;
  opt.training = true;
  opt.dropout_rng = &rng;
  const auto trace = n.forward_traced(x, opt);
  double kept = 0.0;
  for (double v : trace.dropout_masks[0].data()) kept += v;
  EXPECT_NEAR(trace.output[0], kept, 1e-12);
}

TEST(Network, ReferenceFullWeightCount) {
  const auto t = reference_full_topology();
  const std::size_t w = t.generator.weight_count() + t.discriminator.weight_count();
  EXPECT_EQ(w, 1'673'472u);
  EXPECT_NEAR(static_cast<double>(w), 1.7e6, 0.1 * 1.7e6);
  EXPECT_EQ(t.generator.crossbar_layers() + t.discriminator.crossbar_layers(), 6u);
  EXPECT_EQ(t.image_shape(), (Shape{28, 28, 1}));
}

TEST(Topology, ChainingIsValidated) {
  NetworkTopology t;
  t.role = NetworkRole::discriminator;
  LayerDesc a{.kind = LayerKind::relu, .level = 1.0};
  a.in_shape = a.out_shape = {4};
  LayerDesc b = a;
  b.in_shape = b.out_shape = {5};
  t.layers = {a, b};
  EXPECT_THROW(validate(t), Error);
}

TEST(Topology, JsonFileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "memgan_topology_test.json";
  {
    std::ofstream out(path);
    out << R"({"name": "tiny",
      "generator": {"input": [4], "layers": [
        {"kind": "dense", "out": [2, 2, 1], "bias": true}, {"kind": "relu"},
        {"kind": "deconv", "kernel": 3, "filters": 1, "stride": 2, "padding": 1, "output_padding": 1}, {"kind": "tanh"}]},
      "discriminator": {"input": [4, 4, 1], "layers": [
        {"kind": "conv", "kernel": 3, "filters": 2, "padding": 1}, {"kind": "relu"},
        {"kind": "meanpool", "kernel": 2}, {"kind": "dense", "out": [1]}]}})";
  }
  const auto t = topology_by_name(path.string());
  EXPECT_EQ(t.name, "tiny");
  EXPECT_EQ(t.image_shape(), (Shape{4, 4, 1}));
  EXPECT_EQ(t.generator.weight_count(), 5u * 4u + 9u);
  EXPECT_EQ(t.discriminator.weight_count(), 18u + 8u);
  std::filesystem::remove(path);
  EXPECT_THROW(topology_by_name("no-such-topology.json"), Error);
}
