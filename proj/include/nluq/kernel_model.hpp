#pragma once

// Parametrized truncated singular kernel
//
//   B(x, x') = f((x + x') / 2, theta) / (delta^2 |x - x'|^exponent) * 1{|x - x'| < delta}
//
// with the piecewise coefficient f, the prior on (theta, exponent, delta)
// and the logit-style reparametrization used by the random-walk proposals.

#include <Eigen/Core>
#include <array>
#include <string>

#include "nluq/rng.hpp"

namespace nluq {

struct KernelParams {
  double theta = 1.5;
  double exponent = 0.5;  // singularity power of |x - x'|
  double delta = 0.5;     // horizon

  friend bool operator==(const KernelParams&, const KernelParams&) = default;
};

// How the third branch of f (z >= 0.75) is read.
enum class FVariant {
  kLiteral,    // 14.4 + (z - 0.75) + 2
  kQuadratic,  // 14.4 (z - 0.75)^2 + 2
};

FVariant parse_f_variant(const std::string& name);
std::string to_string(FVariant variant);

struct Interval {
  double lo;
  double hi;

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
};

struct PriorSpec {
  Interval theta_range{1.0, 2.0};
  std::array<double, 2> exponent_beta{2.0, 2.0};
  double delta_shape = 1.0;  // only shape 1 (exponential) is supported
  double delta_rate = 1.0;
  Interval delta_truncation{0.125, 1.0};

  // Throws ConfigError when the spec is outside what the sampler supports.
  void validate() const;
};

// Jump locations of f in the midpoint coordinate z.
inline constexpr std::array<double, 2> kForcingBreaks{0.625, 0.75};

// Piecewise coefficient f(z, theta); the first branch is extended to z < 0
// and the third to z >= 1.
double eval_f(double z, double theta, FVariant variant = FVariant::kLiteral);

// theta-independent part of f and the indicator multiplying theta:
// f(z, theta) = f_base(z) + theta * f_theta(z).
double eval_f_base(double z, FVariant variant = FVariant::kLiteral);
inline double eval_f_theta(double z) {
  return (z >= kForcingBreaks[0] && z < kForcingBreaks[1]) ? 1.0 : 0.0;
}

// Throws std::domain_error at x == xp.
double eval_kernel(double x, double xp, const KernelParams& params,
                   FVariant variant = FVariant::kLiteral);

KernelParams prior_sample(Stream& rng, const PriorSpec& prior = {});

// Log density w.r.t. Lebesgue measure on the product support; -inf outside.
double prior_logpdf(const KernelParams& params, const PriorSpec& prior = {});

// Open support boxes per coordinate, in (theta, exponent, delta) order.
std::array<Interval, 3> support_box(const PriorSpec& prior = {});

bool in_support(const KernelParams& params, const PriorSpec& prior = {});

// Coordinate-wise logit onto R^3. to_unbounded throws std::domain_error
// outside the open support; from_unbounded is total.
Eigen::Vector3d to_unbounded(const KernelParams& params, const PriorSpec& prior = {});
KernelParams from_unbounded(const Eigen::Vector3d& u, const PriorSpec& prior = {});

// log |d params / d u| of from_unbounded.
double log_jacobian(const Eigen::Vector3d& u, const PriorSpec& prior = {});

}  // namespace nluq
