#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "memgan/error.hpp"
#include "memgan/tensor.hpp"

namespace memgan {

/// Gaussian fit (mean, covariance) of a set of same-shaped images in
/// pixel space.
struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd cov_sqrt;  // symmetric square root of cov
};

/// Diagonal regularization added to every covariance.
inline constexpr double kCovarianceEps = 1e-6;

namespace detail {

inline Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

inline GaussianFit fit_gaussian(std::span<const Tensor> images) {
  if (images.empty()) throw Error(ErrorCategory::config, "quality: empty image set");
  const auto d = static_cast<Eigen::Index>(images.front().size());
  const auto n = static_cast<Eigen::Index>(images.size());
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Tensor& t = images[static_cast<std::size_t>(i)];
    if (t.shape() != images.front().shape()) throw Error(ErrorCategory::shape, "quality: images differ in shape");
    x.row(i) = Eigen::Map<const Eigen::RowVectorXd>(t.data().data(), d);
  }
  GaussianFit fit;
  fit.mean = x.colwise().mean().transpose();
  x.rowwise() -= fit.mean.transpose();
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  fit.cov = (x.transpose() * x) / denom;
  fit.cov.diagonal().array() += kCovarianceEps;
  fit.cov_sqrt = detail::symmetric_sqrt(fit.cov);
  return fit;
}

/// |mu_a - mu_b|^2 + tr(C_a + C_b - 2 (C_a^1/2 C_b C_a^1/2)^1/2).
inline double frechet_distance(const GaussianFit& a, const GaussianFit& b) {
  if (a.mean.size() != b.mean.size()) throw Error(ErrorCategory::shape, "quality: fits differ in dimension");
  const Eigen::MatrixXd inner = a.cov_sqrt * b.cov * a.cov_sqrt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  const double cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double fd = (a.mean - b.mean).squaredNorm() + a.cov.trace() + b.cov.trace() - 2.0 * cross;
  return std::max(fd, 0.0);
}

/// Frechet distance between Gaussian fits of two image sets (lower is
/// closer).
inline double quality_metric(std::span<const Tensor> generated, std::span<const Tensor> reference) {
  return frechet_distance(fit_gaussian(generated), fit_gaussian(reference));
}

}  // namespace memgan
