#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "memgan/config.hpp"

using namespace memgan;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_run_config(in);
}

std::string error_of(const std::string& text) {
  try {
    validate(parse(text));
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::config);
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  const RunConfig c = parse("");
  EXPECT_NO_THROW(validate(c));
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.data_limit, 1000u);
  EXPECT_EQ(c.train.epochs, 5u);
  EXPECT_EQ(c.train.batch_size, 1u);
  EXPECT_EQ(c.sweep.variability.size(), 6u);
  EXPECT_EQ(c.sweep.levels.size(), 8u);
  EXPECT_EQ(c.sweep.variability_mode, SweepMode::deploy);
  EXPECT_EQ(c.sweep.levels_mode, SweepMode::retrain);
  EXPECT_EQ(c.cost.stats, (TopologyStats{1'700'000, 6, 784}));
  EXPECT_FALSE(c.timing);
}

TEST(Config, EverySection) {
  const RunConfig c = parse(R"(
[run]
seed = 9
out = results
timing = true
topology = toy
latent_dim = 12
[data]
path = /tmp/x
limit = 50
[device]
n_levels = 64
r_on_ohms = 2000
[train]
epochs = 3
batch_size = 4
learning_rate = 0.02
weight_headroom = 1.5
bias_init = 0.2
[analog]
quantize = yes
variability = 0.25
loaded_readout = on
leakage = 0.1
[eval]
metric_samples = 200
sample_seed = 3
gallery = 5
[sweep]
variability = 0, 0.5
levels = 2,256
snapshot_epochs = 1, 5
variability_mode = retrain
levels_mode = deploy
[cost]
epochs = 10
images = 100
from_topology = true
weights = 1000
layers = 3
max_columns = 10
[cmos]
opamp_count = 4
relu_power_mw = 1.5
[leakage]
noise_levels = 0, 0.3
trials = 20
rows = 8
cols = 4
)");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.out_dir, "results");
  EXPECT_TRUE(c.timing);
  EXPECT_EQ(c.topology, "toy");
  EXPECT_EQ(c.latent_dim, 12u);
  EXPECT_EQ(c.data_path, "/tmp/x");
  EXPECT_EQ(c.data_limit, 50u);
  EXPECT_EQ(c.device.n_levels, 64u);
  EXPECT_EQ(c.device.r_on, 2000.0);
  EXPECT_EQ(c.train.epochs, 3u);
  EXPECT_EQ(c.train.batch_size, 4u);
  EXPECT_EQ(c.train.learning_rate, 0.02);
  EXPECT_EQ(c.train.weight_headroom, 1.5);
  EXPECT_EQ(c.train.bias_init, 0.2);
  EXPECT_EQ(c.train.analog, (AnalogEffects{true, 0.25, true, 0.1}));
  EXPECT_EQ(c.metric_samples, 200u);
  EXPECT_EQ(c.sample_seed, 3u);
  EXPECT_EQ(c.gallery_size, 5u);
  EXPECT_EQ(c.sweep.variability, (std::vector<double>{0.0, 0.5}));
  EXPECT_EQ(c.sweep.levels, (std::vector<std::size_t>{2, 256}));
  EXPECT_EQ(c.sweep.snapshot_epochs, (std::vector<std::size_t>{1, 5}));
  EXPECT_EQ(c.sweep.variability_mode, SweepMode::retrain);
  EXPECT_EQ(c.sweep.levels_mode, SweepMode::deploy);
  EXPECT_EQ(c.cost.epochs, 10u);
  EXPECT_EQ(c.cost.images, 100u);
  EXPECT_TRUE(c.cost.from_topology);
  EXPECT_EQ(c.cost.stats, (TopologyStats{1000, 3, 10}));
  EXPECT_EQ(c.cost.counts[static_cast<std::size_t>(CmosComponent::opamp)], 4u);
  EXPECT_EQ(c.cost.table.entries[static_cast<std::size_t>(CmosComponent::relu)].power_mw, 1.5);
  EXPECT_EQ(c.leakage.noise_levels, (std::vector<double>{0.0, 0.3}));
  EXPECT_EQ(c.leakage.trials, 20u);
  EXPECT_EQ(c.leakage.rows, 8u);
  EXPECT_EQ(c.leakage.cols, 4u);
  EXPECT_NO_THROW(validate(c));
}

TEST(Config, Rejections) {
  EXPECT_NE(error_of("[train]\nepoch = 3\n").find("unknown key train.epoch"), std::string::npos);
  EXPECT_NE(error_of("[bogus]\nx = 1\n").find("unknown key"), std::string::npos);
  EXPECT_NE(error_of("[train]\nepochs = three\n").find("train.epochs"), std::string::npos);
  EXPECT_NE(error_of("[train]\nepochs = -2\n").find("non-negative"), std::string::npos);
  EXPECT_NE(error_of("[train]\nepochs = 0\n").find("epochs"), std::string::npos);
  EXPECT_NE(error_of("[train]\nlearning_rate = -1\n").find("learning rate"), std::string::npos);
  EXPECT_NE(error_of("[analog]\nquantize = maybe\n").find("boolean"), std::string::npos);
  EXPECT_NE(error_of("[sweep]\nlevels = 2,,4\n").find("empty list entry"), std::string::npos);
  EXPECT_NE(error_of("[sweep]\nlevels = 1\n").find("at least 2"), std::string::npos);
  EXPECT_NE(error_of("[sweep]\nvariability_mode = sometimes\n").find("sweep mode"), std::string::npos);
  EXPECT_NE(error_of("[device]\nn_levels = 1\n"), "");
  EXPECT_NE(error_of("[device]\nr_on_ohms = 1e6\n"), "");
  EXPECT_NE(error_of("[cmos]\nopamp_power_mw = -1\n"), "");
  EXPECT_NE(error_of("[leakage]\ntrials = 0\n").find("positive"), std::string::npos);
  EXPECT_NE(error_of("[eval]\nmetric_samples = 1\n").find("metric_samples"), std::string::npos);
  EXPECT_NE(error_of("[run\nseed = 1\n"), "");
}

TEST(Config, FullScale) {
  RunConfig c = parse("[train]\nepochs = 2\n");
  apply_full_scale(c);
  EXPECT_EQ(c.data_limit, 0u);
  EXPECT_EQ(c.train.epochs, 50u);
  c.train.epochs = 70;
  apply_full_scale(c);
  EXPECT_EQ(c.train.epochs, 70u);
}

TEST(Config, DataPathResolution) {
  RunConfig c;
  ::unsetenv(kDataEnvVar);
  EXPECT_EQ(resolve_data_path(c), kDefaultDataDir);
  ::setenv(kDataEnvVar, "/from/env", 1);
  EXPECT_EQ(resolve_data_path(c), "/from/env");
  c.data_path = "/from/config";
  EXPECT_EQ(resolve_data_path(c), "/from/config");
  ::unsetenv(kDataEnvVar);
}

TEST(Config, DeviceFiles) {
  EXPECT_EQ(device_by_name("wo2"), wo2_device());
  const auto p = std::filesystem::temp_directory_path() / "memgan_device.ini";
  std::ofstream(p) << "[device]\nn_levels = 16\nv_write_volts = 1.2\n";
  const DeviceSpec d = device_by_name(p.string());
  EXPECT_EQ(d.n_levels, 16u);
  EXPECT_EQ(d.v_write, 1.2);
  EXPECT_EQ(d.r_on, DeviceSpec{}.r_on);
  std::ofstream(p) << "[device]\ncolour = red\n";
  EXPECT_THROW(device_by_name(p.string()), Error);
  std::filesystem::remove(p);
  try {
    device_by_name("/no/such/device.ini");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::io);
  }
}

TEST(Config, ModeNames) {
  for (auto m : {SweepMode::deploy, SweepMode::retrain}) EXPECT_EQ(sweep_mode_from(to_string(m)), m);
}
