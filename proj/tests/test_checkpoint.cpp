#include <gtest/gtest.h>

#include <filesystem>

#include "memgan/checkpoint.hpp"

using namespace memgan;

namespace {

TrainState trained_state() {
  const GanTopology topo = toy_topology();
  TrainConfig config;
  config.epochs = 2;
  config.analog = {true, 0.3, true, 0.0};
  TrainState s = init_state(topo, DeviceSpec{}, config);
  Stream rng(1);
  std::vector<Tensor> data;
  for (int i = 0; i < 6; ++i) {
    Tensor t(topo.image_shape());
    for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
    data.push_back(t);
  }
  train(data, s, config);
  return s;
}

std::string error_of(const std::vector<std::uint8_t>& bytes, std::optional<DeviceSpec> dev = std::nullopt) {
  try {
    decode_checkpoint(bytes, dev);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const TrainState s = trained_state();
  const auto bytes = encode_checkpoint(s);
  const TrainState r = decode_checkpoint(bytes, DeviceSpec{});
  EXPECT_EQ(encode_checkpoint(r), bytes);
  EXPECT_EQ(r.epoch, s.epoch);
  EXPECT_EQ(r.update_events, s.update_events);
  EXPECT_EQ(r.history, s.history);
  EXPECT_EQ(r.generator_weights, s.generator_weights);
  for (std::size_t k = 0; k < s.discriminator.crossbars().size(); ++k) {
    const auto& a = s.discriminator.crossbars()[k];
    const auto& b = r.discriminator.crossbars()[k];
    EXPECT_EQ(a.g_mag_data(), b.g_mag_data());
    EXPECT_EQ(a.sign_data(), b.sign_data());
    EXPECT_EQ(a.effective_weights(), b.effective_weights());
    EXPECT_EQ(a.spec(), b.spec());
  }
  EXPECT_EQ(r.streams.latent.counter(), s.streams.latent.counter());
}

TEST(Checkpoint, FileSaveLoadSave) {
  const TrainState s = trained_state();
  const auto p1 = std::filesystem::temp_directory_path() / "memgan_ckpt_a.mgck";
  const auto p2 = std::filesystem::temp_directory_path() / "memgan_ckpt_b.mgck";
  save_checkpoint(s, p1);
  save_checkpoint(load_checkpoint(p1), p2);
  std::ifstream a(p1, std::ios::binary), b(p2, std::ios::binary);
  const std::string sa{std::istreambuf_iterator<char>(a), {}}, sb{std::istreambuf_iterator<char>(b), {}};
  EXPECT_EQ(sa, sb);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST(Checkpoint, ResumedTrainingMatchesUninterrupted) {
  const GanTopology topo = toy_topology();
  TrainConfig config;
  config.epochs = 1;
  std::vector<Tensor> data(4, Tensor(topo.image_shape(), 0.3));
  TrainState a = init_state(topo, DeviceSpec{}, config);
  train(data, a, config);
  TrainState b = decode_checkpoint(encode_checkpoint(a));
  config.epochs = 2;
  train(data, a, config);
  train(data, b, config);
  EXPECT_EQ(encode_checkpoint(a), encode_checkpoint(b));
}

TEST(Checkpoint, Header) {
  const auto bytes = encode_checkpoint(trained_state());
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "MGANCKPT");
  EXPECT_EQ(bytes[8], 1);  // little-endian version 1
  EXPECT_EQ(bytes[9] | bytes[10] | bytes[11], 0);
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto bytes = encode_checkpoint(trained_state());
  for (std::size_t at : {std::size_t{40}, bytes.size() / 2, bytes.size() - 10}) {
    auto bad = bytes;
    bad[at] ^= 0x5a;
    EXPECT_EQ(error_of(bad), "checkpoint checksum failure") << "byte " << at;
  }
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(error_of(magic), "bad checkpoint magic");
  auto version = bytes;
  version[8] = 2;
  EXPECT_NE(error_of(version).find("checkpoint version mismatch"), std::string::npos);
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(bytes.size() / 3));
  EXPECT_NE(error_of(cut), "");
}

TEST(Checkpoint, SpecMismatch) {
  const auto bytes = encode_checkpoint(trained_state());
  DeviceSpec other;
  other.n_levels = 64;
  EXPECT_EQ(error_of(bytes, other), "spec mismatch");
  EXPECT_EQ(error_of(bytes, DeviceSpec{}), "");
}
