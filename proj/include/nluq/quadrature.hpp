#pragma once

// Gauss rules from the Golub-Welsch eigenvalue problem.
//
// gauss_jacobi(n, a, b) integrates p(x) (1-x)^a (1+x)^b on [-1, 1] exactly
// for polynomials p of degree <= 2n-1. The singular-kernel assembly uses it
// with a = 0, b = -exponent so that the |t|^-exponent factor is carried by
// the weight instead of the integrand.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

namespace nluq {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct QuadratureRule {
  VectorX<Scalar> nodes;
  VectorX<Scalar> weights;

  Eigen::Index size() const { return nodes.size(); }
};

template <typename Scalar>
QuadratureRule<Scalar> gauss_jacobi(int n, Scalar a, Scalar b) {
  using std::lgamma;
  using std::exp;
  using std::log;
  using std::sqrt;
  VectorX<Scalar> diag(n);
  VectorX<Scalar> sub(n > 1 ? n - 1 : 0);
  const Scalar ab = a + b;
  for (int k = 0; k < n; ++k) {
    if (k == 0) {
      diag(k) = (b - a) / (ab + 2);
    } else {
      const Scalar s = 2 * Scalar(k) + ab;
      diag(k) = (b * b - a * a) / (s * (s + 2));
    }
  }
  for (int k = 1; k < n; ++k) {
    const Scalar kk = Scalar(k);
    const Scalar s = 2 * kk + ab;
    Scalar beta;
    if (k == 1) {
      // (1 + a + b) cancels; keeps the a + b -> -1 limit finite.
      beta = 4 * (1 + a) * (1 + b) / ((2 + ab) * (2 + ab) * (3 + ab));
    } else {
      beta = 4 * kk * (kk + a) * (kk + b) * (kk + ab) / (s * s * (s + 1) * (s - 1));
    }
    sub(k - 1) = sqrt(beta);
  }
  const Scalar log_mu0 = (ab + 1) * log(Scalar(2)) + lgamma(a + 1) + lgamma(b + 1) - lgamma(ab + 2);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> eig;
  eig.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  QuadratureRule<Scalar> rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = exp(log_mu0) * eig.eigenvectors().row(0).transpose().array().square();
  return rule;
}

template <typename Scalar>
QuadratureRule<Scalar> gauss_legendre(int n) {
  return gauss_jacobi<Scalar>(n, Scalar(0), Scalar(0));
}

// Affine map of a rule on [-1, 1] to [lo, hi] (Legendre weight only).
template <typename Scalar>
QuadratureRule<Scalar> mapped(const QuadratureRule<Scalar>& ref, Scalar lo, Scalar hi) {
  const Scalar half = (hi - lo) / 2;
  const Scalar mid = (hi + lo) / 2;
  QuadratureRule<Scalar> out;
  out.nodes = (ref.nodes.array() * half + mid).matrix();
  out.weights = ref.weights * half;
  return out;
}

// Rule on [0, 1] for the weight t^-exponent: sum w_i g(t_i) ~ int_0^1 t^-exponent g(t) dt.
template <typename Scalar>
QuadratureRule<Scalar> left_singular_rule(int n, Scalar exponent) {
  using std::pow;
  auto rule = gauss_jacobi<Scalar>(n, Scalar(0), -exponent);
  rule.nodes = ((rule.nodes.array() + 1) / 2).matrix();
  rule.weights *= pow(Scalar(2), exponent - 1);
  return rule;
}

}  // namespace nluq
