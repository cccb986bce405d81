#pragma once

// Small fixed-order statistics helpers shared by the samplers.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

namespace nluq {

template <typename Derived>
typename Derived::Scalar sample_mean(const Eigen::DenseBase<Derived>& x) {
  return x.size() > 0 ? x.sum() / typename Derived::Scalar(x.size()) : typename Derived::Scalar(0);
}

// Unbiased sample variance (n - 1 denominator); 0 for fewer than two values.
template <typename Derived>
typename Derived::Scalar sample_variance(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.size() < 2) {
    return Scalar(0);
  }
  const Scalar m = sample_mean(x);
  return (x.derived().array() - m).square().sum() / Scalar(x.size() - 1);
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  Eigen::VectorXd residuals;
};

// Ordinary least squares y ~ intercept + slope * x.
inline LineFit fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  Eigen::MatrixXd design(x.size(), 2);
  design.col(0).setOnes();
  design.col(1) = x;
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(y);
  LineFit fit;
  fit.intercept = coef(0);
  fit.slope = coef(1);
  fit.residuals = y - design * coef;
  return fit;
}

inline Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace nluq
