#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "memgan/device.hpp"

using namespace memgan;

namespace {

DeviceSpec with_levels(std::size_t n) {
  DeviceSpec d;
  d.n_levels = n;
  return d;
}

// Brute force: scan every level, keep the closest, prefer the higher one on a tie.
double nearest_level(double g, const std::vector<double>& levels) {
  double best = levels.front();
  double best_d = std::abs(g - best);
  for (double l : levels) {
    const double d = std::abs(g - l);
    if (d <= best_d) {
      best = l;
      best_d = d;
    }
  }
  return best;
}

}  // namespace

TEST(DeviceSpec, ValidationRejectsBadParameters) {
  DeviceSpec d;
  EXPECT_NO_THROW(validate(d));
  d.r_on = 30e3;
  EXPECT_THROW(validate(d), Error);
  d = {};
  d.v_write = 0.5;
  EXPECT_THROW(validate(d), Error);
  d = {};
  d.n_levels = 1;
  EXPECT_THROW(validate(d), Error);
  d = {};
  d.r_on = 0.0;
  EXPECT_THROW(validate(d), Error);
}

TEST(ConductanceLevels, TwoLevelsAreTheEndpoints) {
  const auto l = conductance_levels(with_levels(2));
  ASSERT_EQ(l.size(), 2u);
  EXPECT_DOUBLE_EQ(l[0], 4.0e-5);
  EXPECT_DOUBLE_EQ(l[1], 2.5e-4);
}

TEST(ConductanceLevels, ThreeLevelsHaveTheMidpoint) {
  const auto l = conductance_levels(with_levels(3));
  ASSERT_EQ(l.size(), 3u);
  EXPECT_NEAR(l[1], 1.45e-4, 1e-18);
}

TEST(ConductanceLevels, UniformGridOf128) {
  const auto l = conductance_levels(with_levels(128));
  ASSERT_EQ(l.size(), 128u);
  const double gap = (2.5e-4 - 4.0e-5) / 127.0;
  for (std::size_t k = 1; k < l.size(); ++k) {
    EXPECT_GT(l[k], l[k - 1]);
    EXPECT_NEAR(l[k] - l[k - 1], gap, 1e-15);
  }
  EXPECT_EQ(l.front(), 1.0 / 25e3);
  EXPECT_EQ(l.back(), 1.0 / 4e3);
}

TEST(Quantize, Examples) {
  for (std::size_t n : {2, 3, 64, 128, 256}) EXPECT_EQ(quantize(2.5e-4, with_levels(n)), 2.5e-4);
  EXPECT_EQ(quantize(1.0e-3, with_levels(128)), 2.5e-4);
  EXPECT_EQ(quantize(0.0, with_levels(128)), 4.0e-5);
  EXPECT_EQ(quantize(1.0e-4, with_levels(2)), 4.0e-5);
}

TEST(Quantize, MidpointRoundsUp) {
  const DeviceSpec d = with_levels(2);
  EXPECT_EQ(quantize(1.45e-4, d), 2.5e-4);
  const DeviceSpec d3 = with_levels(3);
  const auto l = conductance_levels(d3);
  EXPECT_EQ(quantize(0.5 * (l[0] + l[1]), d3), l[1]);
}

TEST(Quantize, MatchesBruteForceNearestLevel) {
  Stream rng(11);
  for (std::size_t n : {2, 5, 64, 256}) {
    const DeviceSpec d = with_levels(n);
    const auto levels = conductance_levels(d);
    for (int i = 0; i < 20000; ++i) {
      const double g = rng.uniform(0.0, 3e-4);
      EXPECT_EQ(quantize(g, d), nearest_level(std::clamp(g, d.g_off(), d.g_on()), levels)) << "g=" << g << " n=" << n;
    }
  }
}

TEST(Quantize, IdempotentAndWithinHalfGap) {
  Stream rng(3);
  for (std::size_t n : {2, 64, 256}) {
    const DeviceSpec d = with_levels(n);
    const double half = 0.5 * d.level_gap() * (1.0 + 1e-9);
    for (int i = 0; i < 100000; ++i) {
      const double g = rng.uniform(d.g_off(), d.g_on());
      const double q = quantize(g, d);
      ASSERT_EQ(quantize(q, d), q);
      ASSERT_LE(std::abs(q - g), half);
    }
  }
}

TEST(Variability, ZeroSigmaIsIdentity) {
  const DeviceSpec d;
  const VariabilityModel m{0.0, VariabilityDistribution::multiplicative_gaussian, 5};
  for (std::uint64_t i = 0; i < 100; ++i) EXPECT_EQ(sample_variability(1.0e-4, m, d, i), 1.0e-4);
}

TEST(Variability, MonteCarloMeanWithinOnePercent) {
  const DeviceSpec d;
  const VariabilityModel m{0.3, VariabilityDistribution::multiplicative_gaussian, 42};
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += sample_variability(1.0e-4, m, d, static_cast<std::uint64_t>(i));
  EXPECT_NEAR(sum / n, 1.0e-4, 1.0e-6);
}

TEST(Variability, SpreadMatchesSigma) {
  const DeviceSpec d;
  const VariabilityModel m{0.1, VariabilityDistribution::multiplicative_gaussian, 9};
  double s1 = 0.0, s2 = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double eps = sample_variability(1.0e-4, m, d, static_cast<std::uint64_t>(i)) / 1.0e-4 - 1.0;
    s1 += eps;
    s2 += eps * eps;
  }
  EXPECT_NEAR(std::sqrt(s2 / n - (s1 / n) * (s1 / n)), 0.1, 0.002);
}

TEST(Variability, ClippedToDeviceRange) {
  const DeviceSpec d;
  const VariabilityModel m{0.5, VariabilityDistribution::multiplicative_gaussian, 1};
  for (std::uint64_t i = 0; i < 10000; ++i) {
    EXPECT_LE(sample_variability(2.5e-4, m, d, i), 2.5e-4);
    EXPECT_GE(sample_variability(4.0e-5, m, d, i), 4.0e-5);
  }
}

TEST(Variability, ReproducibleForSeedAndIndex) {
  const DeviceSpec d;
  const VariabilityModel a{0.2, VariabilityDistribution::multiplicative_gaussian, 77};
  const VariabilityModel b{0.2, VariabilityDistribution::multiplicative_gaussian, 78};
  bool any_diff = false;
  for (std::uint64_t i = 0; i < 100; ++i) {
    EXPECT_EQ(sample_variability(1e-4, a, d, i), sample_variability(1e-4, a, d, i));
    any_diff |= sample_variability(1e-4, a, d, i) != sample_variability(1e-4, b, d, i);
  }
  EXPECT_TRUE(any_diff);
}

TEST(WritePower, Examples) {
  DeviceSpec d;
  EXPECT_DOUBLE_EQ(write_power(d, 1.0 / 4000.0), 2.5e-4);
  EXPECT_DOUBLE_EQ(write_power(d, 1.0 / 25000.0), 4.0e-5);
  EXPECT_NEAR(141667 * write_power(d, d.g_on()), 35.4, 0.1);
  d.v_write = 0.0;
  EXPECT_EQ(write_power(d, 1e-4), 0.0);
}

TEST(WritePower, LinearAndMonotone) {
  const DeviceSpec d;
  const auto l = conductance_levels(d);
  for (std::size_t k = 1; k < l.size(); ++k) {
    EXPECT_GT(write_power(d, l[k]), write_power(d, l[k - 1]));
    EXPECT_NEAR(write_power(d, l[k]) / l[k], d.v_write * d.v_write, 1e-12);
  }
}
