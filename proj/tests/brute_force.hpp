#pragma once

// Independent stiffness-matrix oracle: nested adaptive Gauss-Kronrod on the
// defining double integrals, with the singular end of every inner integral
// removed by the substitution |x - x'| = r^(1 / (1 - exponent)). Shares
// nothing with the library's assembly except eval_f.

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <functional>
#include <vector>

#include "nluq/kernel_model.hpp"

namespace brute {

using Fn = std::function<double(double)>;
using GK31 = boost::math::quadrature::gauss_kronrod<double, 31>;
using GK15 = boost::math::quadrature::gauss_kronrod<double, 15>;

inline double basis(int a, const nluq::Interval& e, double x) {
  return a == 0 ? 1.0 : (2.0 * x - e.lo - e.hi) / (e.hi - e.lo);
}

// int_lo^hi g(x') |x' - x|^-exponent dx' with x outside (lo, hi) or at an end.
inline double inner_piece(const Fn& g, double x, double lo, double hi, double exponent) {
  const double q = 1.0 / (1.0 - exponent);
  if (lo >= x) {
    const double r0 = std::pow(lo - x, 1.0 - exponent);
    const double r1 = std::pow(hi - x, 1.0 - exponent);
    return GK31::integrate([&](double r) { return q * g(x + std::pow(r, q)); }, r0, r1, 10, 1e-11);
  }
  const double r0 = std::pow(x - hi, 1.0 - exponent);
  const double r1 = std::pow(x - lo, 1.0 - exponent);
  return GK31::integrate([&](double r) { return q * g(x - std::pow(r, q)); }, r0, r1, 10, 1e-11);
}

inline double inner(const Fn& g, double x, double lo, double hi, double exponent, std::vector<double> cuts) {
  cuts.insert(cuts.end(), {lo, hi, x});
  std::sort(cuts.begin(), cuts.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = std::max(lo, cuts[i]);
    const double b = std::min(hi, cuts[i + 1]);
    if (b > a) s += inner_piece(g, x, a, b, exponent);
  }
  return s;
}

// Outer integral on pieces between kinks; a smooth sigmoidal change of
// variables clusters nodes at the piece ends where the integrand has
// derivative singularities.
inline double outer(const Fn& F, double lo, double hi, std::vector<double> cuts) {
  cuts.insert(cuts.end(), {lo, hi});
  std::sort(cuts.begin(), cuts.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = std::max(lo, cuts[i]);
    const double b = std::min(hi, cuts[i + 1]);
    if (!(b > a)) continue;
    s += GK15::integrate(
        [&](double u) {
          const double p = u * u * u;
          const double q = (1 - u) * (1 - u) * (1 - u);
          const double d = p + q;
          const double dw = 3 * u * u * (1 - u) * (1 - u) / (d * d);
          return (b - a) * dw * F(a + (b - a) * p / d);
        },
        0.0, 1.0, 12, 1e-10);
  }
  return s;
}

inline double pair(const nluq::Interval& I, const nluq::Interval& J, int a, int b, const nluq::KernelParams& p,
                   nluq::FVariant variant) {
  const double d = p.delta;
  const Fn F = [&](double x) {
    const Fn g = [&](double xp) { return nluq::eval_f(0.5 * (x + xp), p.theta, variant) / (d * d) * basis(b, J, xp); };
    const double lo = std::max(J.lo, x - d);
    const double hi = std::min(J.hi, x + d);
    if (!(hi > lo)) return 0.0;
    return basis(a, I, x) * inner(g, x, lo, hi, p.exponent, {1.25 - x, 1.5 - x});
  };
  return outer(F, I.lo, I.hi,
               {J.lo, J.hi, J.lo + d, J.lo - d, J.hi + d, J.hi - d, 1.25 - J.lo, 1.25 - J.hi, 1.5 - J.lo,
                1.5 - J.hi});
}

inline double collision(const nluq::Interval& I, int a, int b, const nluq::KernelParams& p,
                        nluq::FVariant variant) {
  const double d = p.delta;
  const Fn F = [&](double x) {
    const Fn g = [&](double xp) { return nluq::eval_f(0.5 * (x + xp), p.theta, variant) / (d * d); };
    return basis(a, I, x) * basis(b, I, x) * inner(g, x, x - d, x + d, p.exponent, {1.25 - x, 1.5 - x});
  };
  return outer(F, I.lo, I.hi, {0.625 + d / 2, 0.625 - d / 2, 0.75 + d / 2, 0.75 - d / 2, 0.625, 0.75});
}

// Dense matrix with entry (2 j + b, 2 i + a) = int_{e_i} int_{e_j} B phi_b(x') phi_a(x)
// minus, on diagonal blocks, int_{e_i} phi_a phi_b kappa.
inline Eigen::MatrixXd matrix(const nluq::KernelParams& p, int level, int k = 3,
                              nluq::FVariant variant = nluq::FVariant::kLiteral) {
  const int n = 1 << (k + level);
  const double h = 1.0 / n;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    const nluq::Interval I{i * h, (i + 1) * h};
    for (int j = i; j < n; ++j) {
      const nluq::Interval J{j * h, (j + 1) * h};
      if ((j - i - 1) * h >= p.delta) break;  // gap at least the horizon
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          double v = pair(I, J, a, b, p, variant);
          if (i == j) v -= collision(I, a, b, p, variant);
          A(2 * j + b, 2 * i + a) = v;
          A(2 * i + a, 2 * j + b) = v;
        }
      }
    }
  }
  return A;
}

}  // namespace brute
