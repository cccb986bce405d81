#include <doctest.h>

#include <cmath>
#include <limits>

#include "nluq/errors.hpp"
#include "nluq/kernel_model.hpp"
#include "nluq/nonlocal_fem.hpp"
#include "nluq/quadrature.hpp"

using namespace nluq;

namespace {

double log_delta_density(double d, const PriorSpec& prior = {}) {
  const double r = prior.delta_rate;
  const auto t = prior.delta_truncation;
  return std::log(r) - r * d - std::log(std::exp(-r * t.lo) - std::exp(-r * t.hi));
}

}  // namespace

TEST_CASE("eval_f branches") {
  CHECK(eval_f(0.625, 1.25) == doctest::Approx(1.875).epsilon(1e-15));
  CHECK(eval_f(0.0, 1.0) == doctest::Approx(0.590625).epsilon(1e-15));
  CHECK(eval_f(0.75, 1.0) == doctest::Approx(16.4).epsilon(1e-15));
  CHECK(eval_f(0.75, 1.0, FVariant::kQuadratic) == doctest::Approx(2.0).epsilon(1e-15));
  // left-closed pieces
  CHECK(eval_f(std::nextafter(0.625, 0.0), 1.0) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(eval_f(std::nextafter(0.75, 0.0), 1.5) == doctest::Approx(2.25).epsilon(1e-12));
  // extensions beyond [0, 1)
  CHECK(eval_f(-0.25, 1.0) == doctest::Approx(0.2 + 0.875 * 0.875));
  CHECK(eval_f(1.25, 1.0) == doctest::Approx(16.9));
  for (double z = -0.5; z <= 1.5; z += 0.01) {
    CHECK(eval_f(z, 1.3) == doctest::Approx(eval_f_base(z) + 1.3 * eval_f_theta(z)));
  }
  CHECK(parse_f_variant(to_string(FVariant::kQuadratic)) == FVariant::kQuadratic);
  CHECK_THROWS_AS(parse_f_variant("cubic"), ConfigError);
}

TEST_CASE("eval_kernel values, support and symmetry") {
  CHECK(eval_kernel(0.3, 0.5, {1.7, 0.4, 0.15}) == 0.0);
  CHECK(eval_kernel(0.3, 0.35, {1.25, 1.0, 0.1}) == doctest::Approx(580.0).epsilon(1e-12));
  CHECK_THROWS_AS(eval_kernel(0.4, 0.4, {1.5, 0.5, 0.5}), std::domain_error);

  Stream rng(17);
  for (int i = 0; i < 100; ++i) {
    const KernelParams p = prior_sample(rng);
    const double x = uniform01(rng);
    const double xp = -p.delta + (1.0 + 2.0 * p.delta) * uniform01(rng);
    const double v = eval_kernel(x, xp, p);
    CHECK(v == eval_kernel(xp, x, p));
    CHECK(v >= 0.0);
    CHECK((v == 0.0) == (std::abs(x - xp) >= p.delta));
  }
}

TEST_CASE("interaction mass is finite for in-support parameters") {
  Stream rng(5);
  for (int i = 0; i < 20; ++i) {
    const KernelParams p = prior_sample(rng);
    for (double x : {0.0, 0.3, 0.5, 0.625, 1.0}) {
      const double k = interaction_mass(x, p);
      CHECK(std::isfinite(k));
      CHECK(k > 0.0);
      // K_1-type bound: f <= 16.9 + theta, int |t|^-a over |t| < delta
      CHECK(k <= 18.9 / (p.delta * p.delta) * 2.0 * std::pow(p.delta, 1.0 - p.exponent) / (1.0 - p.exponent));
    }
  }
}

TEST_CASE("prior_sample moments and support") {
  Stream rng(2024);
  const int n = 100000;
  double st = 0.0;
  double se = 0.0;
  bool delta_ok = true;
  for (int i = 0; i < n; ++i) {
    const KernelParams p = prior_sample(rng);
    st += p.theta;
    se += p.exponent;
    delta_ok = delta_ok && p.delta > 0.125 && p.delta < 1.0;
  }
  CHECK(std::abs(st / n - 1.5) < 3.0 * std::sqrt(1.0 / 12.0) / std::sqrt(double(n)));
  CHECK(std::abs(se / n - 0.5) < 3.0 * std::sqrt(0.05) / std::sqrt(double(n)));
  CHECK(delta_ok);
}

TEST_CASE("prior_logpdf") {
  CHECK(prior_logpdf({0.9, 0.5, 0.5}) == -std::numeric_limits<double>::infinity());
  CHECK(prior_logpdf({1.5, 1.0, 0.5}) == -std::numeric_limits<double>::infinity());
  CHECK(prior_logpdf({1.5, 0.5, 0.1}) == -std::numeric_limits<double>::infinity());
  // theta contributes log 1 = 0
  CHECK(prior_logpdf({1.1, 0.3, 0.4}) == doctest::Approx(prior_logpdf({1.9, 0.3, 0.4})).epsilon(1e-15));
  CHECK(prior_logpdf({1.5, 0.5, 0.4}) - log_delta_density(0.4) == doctest::Approx(std::log(1.5)).epsilon(1e-14));

  // integrates to one over the support
  const auto gl = gauss_legendre<double>(30);
  const auto box = support_box();
  double total = 0.0;
  for (int i = 0; i < gl.size(); ++i) {
    for (int j = 0; j < gl.size(); ++j) {
      for (int k = 0; k < gl.size(); ++k) {
        const auto at = [&](int d, int idx) { return box[d].mid() + 0.5 * box[d].width() * gl.nodes(idx); };
        const double w = gl.weights(i) * gl.weights(j) * gl.weights(k) * 0.125 * box[0].width() *
                         box[1].width() * box[2].width();
        total += w * std::exp(prior_logpdf({at(0, i), at(1, j), at(2, k)}));
      }
    }
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("unbounded transform") {
  Stream rng(99);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const KernelParams p = prior_sample(rng);
    const KernelParams q = from_unbounded(to_unbounded(p));
    worst = std::max({worst, std::abs(p.theta - q.theta), std::abs(p.exponent - q.exponent),
                      std::abs(p.delta - q.delta)});
  }
  CHECK(worst < 1e-12);

  const auto box = support_box();
  const Eigen::Vector3d mid = to_unbounded({box[0].mid(), box[1].mid(), box[2].mid()});
  CHECK(mid.norm() < 1e-14);

  double last = 0.0;
  for (int e = 1; e <= 12; ++e) {
    const double u = to_unbounded({1.0 + std::pow(10.0, -e), 0.5, 0.5})(0);
    if (e > 1) CHECK(u < last);
    last = u;
  }
  CHECK(last < -25.0);
  CHECK_THROWS_AS(to_unbounded({1.0, 0.5, 0.5}), std::domain_error);

  // Jacobian against finite differences of the map
  const Eigen::Vector3d u(0.3, -0.7, 1.1);
  double logdet = 0.0;
  for (int d = 0; d < 3; ++d) {
    Eigen::Vector3d up = u;
    Eigen::Vector3d um = u;
    up(d) += 1e-6;
    um(d) -= 1e-6;
    const KernelParams a = from_unbounded(up);
    const KernelParams b = from_unbounded(um);
    const double da[3] = {a.theta - b.theta, a.exponent - b.exponent, a.delta - b.delta};
    logdet += std::log(da[d] / 2e-6);
  }
  CHECK(log_jacobian(u) == doctest::Approx(logdet).epsilon(1e-8));
}

TEST_CASE("prior spec validation") {
  PriorSpec p;
  CHECK_NOTHROW(p.validate());
  p.delta_shape = 2.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}
