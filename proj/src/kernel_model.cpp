#include "nluq/kernel_model.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "nluq/errors.hpp"

namespace nluq {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double softplus(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

double sigmoid(double v) {
  if (v >= 0) {
    return 1.0 / (1.0 + std::exp(-v));
  }
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double truncated_exp_mass(const PriorSpec& prior) {
  const auto [lo, hi] = prior.delta_truncation;
  return std::exp(-prior.delta_rate * lo) - std::exp(-prior.delta_rate * hi);
}

}  // namespace

FVariant parse_f_variant(const std::string& name) {
  if (name == "literal") {
    return FVariant::kLiteral;
  }
  if (name == "quadratic") {
    return FVariant::kQuadratic;
  }
  throw ConfigError("unknown f_variant '" + name + "' (expected literal or quadratic)");
}

std::string to_string(FVariant variant) {
  return variant == FVariant::kLiteral ? "literal" : "quadratic";
}

void PriorSpec::validate() const {
  if (!(theta_range.lo < theta_range.hi)) {
    throw ConfigError("prior.theta_range must satisfy lo < hi");
  }
  if (!(exponent_beta[0] > 0 && exponent_beta[1] > 0)) {
    throw ConfigError("prior.exponent_beta parameters must be positive");
  }
  if (delta_shape != 1.0) {
    throw ConfigError("prior.delta_shape must be 1 (exponential); other shapes are not supported");
  }
  if (!(delta_rate > 0)) {
    throw ConfigError("prior.delta_rate must be positive");
  }
  if (!(delta_truncation.lo > 0 && delta_truncation.lo < delta_truncation.hi)) {
    throw ConfigError("prior.delta_truncation must satisfy 0 < lo < hi");
  }
}

double eval_f_base(double z, FVariant variant) {
  if (z < kForcingBreaks[0]) {
    const double d = z - 0.625;
    return 0.2 + d * d;
  }
  if (z < kForcingBreaks[1]) {
    return z;
  }
  const double d = z - 0.75;
  return variant == FVariant::kLiteral ? 14.4 + d + 2.0 : 14.4 * d * d + 2.0;
}

double eval_f(double z, double theta, FVariant variant) {
  return eval_f_base(z, variant) + theta * eval_f_theta(z);
}

double eval_kernel(double x, double xp, const KernelParams& params, FVariant variant) {
  if (x == xp) {
    throw std::domain_error("eval_kernel: kernel is singular at x == x'");
  }
  const double r = std::abs(x - xp);
  if (r >= params.delta) {
    return 0.0;
  }
  return eval_f(0.5 * (x + xp), params.theta, variant) /
         (params.delta * params.delta * std::pow(r, params.exponent));
}

KernelParams prior_sample(Stream& rng, const PriorSpec& prior) {
  KernelParams p;
  p.theta = prior.theta_range.lo + prior.theta_range.width() * uniform01(rng);

  std::gamma_distribution<double> ga(prior.exponent_beta[0], 1.0);
  std::gamma_distribution<double> gb(prior.exponent_beta[1], 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  p.exponent = x / (x + y);

  // Inverse CDF of Exp(rate) truncated to (lo, hi).
  const double u = uniform01(rng);
  const double rate = prior.delta_rate;
  const double top = std::exp(-rate * prior.delta_truncation.lo);
  p.delta = -std::log(top - u * truncated_exp_mass(prior)) / rate;
  return p;
}

std::array<Interval, 3> support_box(const PriorSpec& prior) {
  return {prior.theta_range, Interval{0.0, 1.0}, prior.delta_truncation};
}

bool in_support(const KernelParams& p, const PriorSpec& prior) {
  const auto box = support_box(prior);
  const std::array<double, 3> v{p.theta, p.exponent, p.delta};
  for (int i = 0; i < 3; ++i) {
    if (!(v[i] > box[i].lo && v[i] < box[i].hi)) {
      return false;
    }
  }
  return true;
}

double prior_logpdf(const KernelParams& p, const PriorSpec& prior) {
  // theta support is closed for the uniform; the other two are open.
  if (!(p.theta >= prior.theta_range.lo && p.theta <= prior.theta_range.hi)) {
    return kNegInf;
  }
  if (!(p.exponent > 0 && p.exponent < 1)) {
    return kNegInf;
  }
  if (!(p.delta > prior.delta_truncation.lo && p.delta < prior.delta_truncation.hi)) {
    return kNegInf;
  }
  const auto [a, b] = prior.exponent_beta;
  const double log_beta_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  const double log_theta = -std::log(prior.theta_range.width());
  const double log_exponent =
      log_beta_norm + (a - 1) * std::log(p.exponent) + (b - 1) * std::log1p(-p.exponent);
  const double log_delta =
      std::log(prior.delta_rate) - prior.delta_rate * p.delta - std::log(truncated_exp_mass(prior));
  return log_theta + log_exponent + log_delta;
}

Eigen::Vector3d to_unbounded(const KernelParams& p, const PriorSpec& prior) {
  if (!in_support(p, prior)) {
    throw std::domain_error("to_unbounded: parameters outside the open prior support");
  }
  const auto box = support_box(prior);
  const std::array<double, 3> v{p.theta, p.exponent, p.delta};
  Eigen::Vector3d u;
  for (int i = 0; i < 3; ++i) {
    // logit(s) with s = (v - lo) / (hi - lo), written to keep precision near both ends.
    u(i) = std::log(v[i] - box[i].lo) - std::log(box[i].hi - v[i]);
  }
  return u;
}

KernelParams from_unbounded(const Eigen::Vector3d& u, const PriorSpec& prior) {
  const auto box = support_box(prior);
  std::array<double, 3> v{};
  for (int i = 0; i < 3; ++i) {
    v[i] = u(i) >= 0 ? box[i].hi - box[i].width() * sigmoid(-u(i))
                     : box[i].lo + box[i].width() * sigmoid(u(i));
  }
  return {v[0], v[1], v[2]};
}

double log_jacobian(const Eigen::Vector3d& u, const PriorSpec& prior) {
  const auto box = support_box(prior);
  double out = 0.0;
  for (int i = 0; i < 3; ++i) {
    out += std::log(box[i].width()) - softplus(u(i)) - softplus(-u(i));
  }
  return out;
}

}  // namespace nluq
