#include <gtest/gtest.h>

#include <cmath>

#include "memgan/quality.hpp"
#include "memgan/random.hpp"

using namespace memgan;

namespace {

std::vector<Tensor> gaussian_set(std::size_t n, std::size_t dim, std::uint64_t seed, double mean, double sd) {
  Stream rng(seed);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor t({dim});
    for (double& v : t.data()) v = rng.normal(mean, sd);
    out.push_back(std::move(t));
  }
  return out;
}

// Closed form for diagonal covariances: |dmu|^2 + sum (s_a - s_b)^2.
double diagonal_oracle(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  const std::size_t d = a.front().size();
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    auto stats = [&](const std::vector<Tensor>& s) {
      double m = 0.0;
      for (const auto& t : s) m += t[j];
      m /= static_cast<double>(s.size());
      double v = 0.0;
      for (const auto& t : s) v += (t[j] - m) * (t[j] - m);
      return std::pair{m, v / static_cast<double>(s.size() - 1) + kCovarianceEps};
    };
    const auto [ma, va] = stats(a);
    const auto [mb, vb] = stats(b);
    total += (ma - mb) * (ma - mb) + (std::sqrt(va) - std::sqrt(vb)) * (std::sqrt(va) - std::sqrt(vb));
  }
  return total;
}

}  // namespace

TEST(Quality, IdenticalSetsGiveZero) {
  const auto a = gaussian_set(200, 12, 1, 0.0, 1.0);
  EXPECT_NEAR(quality_metric(a, a), 0.0, 1e-8);
}

TEST(Quality, MeanShiftAddsTraceTerm) {
  const auto a = gaussian_set(300, 16, 2, 0.0, 0.5);
  for (double delta : {0.1, 0.5, 1.0}) {
    auto b = a;
    for (auto& t : b)
      for (double& v : t.data()) v += delta;
    const double q = quality_metric(b, a);
    EXPECT_GE(q, 16 * delta * delta * (1 - 1e-9));
    EXPECT_NEAR(q, 16 * delta * delta, 1e-7);
  }
}

TEST(Quality, Symmetric) {
  const auto a = gaussian_set(150, 10, 3, 0.0, 1.0);
  const auto b = gaussian_set(150, 10, 4, 0.3, 0.7);
  EXPECT_NEAR(quality_metric(a, b), quality_metric(b, a), 1e-9);
}

TEST(Quality, OneDimensionalClosedForm) {
  std::vector<Tensor> a, b;
  for (double v : {0.0, 1.0, 2.0, 3.0}) a.emplace_back(Shape{1}, std::vector<double>{v});
  for (double v : {1.0, 5.0}) b.emplace_back(Shape{1}, std::vector<double>{v});
  EXPECT_NEAR(quality_metric(a, b), diagonal_oracle(a, b), 1e-9);
}

TEST(Quality, MatchesDiagonalClosedForm) {
  // Each dimension of b is a scaled and shifted copy of a's, so both sample
  // covariances are diagonal up to the shared cross terms; use independent
  // single pixels to keep them exactly diagonal.
  std::vector<Tensor> a, b;
  Stream rng(5);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      Tensor t({2}), u({2});
      const double x = i - 1.5, y = j - 1.5;
      t[0] = x;
      t[1] = y;
      u[0] = 2 * x + 1;
      u[1] = 0.5 * y - 3;
      a.push_back(t);
      b.push_back(u);
    }
  }
  EXPECT_NEAR(quality_metric(a, b), diagonal_oracle(a, b), 1e-9);
}

TEST(Quality, NonNegativeAndHandlesSingularCovariance) {
  std::vector<Tensor> flat(5, Tensor({20}, 0.25));
  const auto noisy = gaussian_set(5, 20, 6, 0.0, 1.0);
  EXPECT_GE(quality_metric(flat, noisy), 0.0);
  EXPECT_TRUE(std::isfinite(quality_metric(flat, noisy)));
  EXPECT_NEAR(quality_metric(flat, flat), 0.0, 1e-9);
}

TEST(Quality, ErrorsOnEmptyOrMismatched) {
  const auto a = gaussian_set(5, 4, 7, 0.0, 1.0);
  const auto b = gaussian_set(5, 3, 8, 0.0, 1.0);
  EXPECT_THROW(quality_metric(std::vector<Tensor>{}, a), Error);
  EXPECT_THROW(quality_metric(a, b), Error);
}

TEST(Quality, Deterministic) {
  const auto a = gaussian_set(100, 30, 9, 0.0, 1.0);
  const auto b = gaussian_set(100, 30, 10, 0.1, 1.2);
  EXPECT_EQ(quality_metric(a, b), quality_metric(a, b));
}
