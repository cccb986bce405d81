#pragma once

// Ground truth and calibration: synthetic data, convergence-rate fits,
// tensor-quadrature oracles over (theta, exponent, delta) and cost-rate
// measurement.

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "nluq/mlsmc.hpp"
#include "nluq/nonlocal_fem.hpp"
#include "nluq/quadrature.hpp"
#include "nluq/rng.hpp"

namespace nluq {

struct DataSpec {
  KernelParams truth{2.0, 0.5, 0.2};
  std::vector<double> locations{0.25, 0.75};
  double sigma2 = 0.01;
  bool noiseless = false;     // y = G(truth) exactly
  int sampler_max_level = 0;  // level_ref must be at least this + 2
};

// y = G_{level_ref}(truth) + N(0, sigma2 I).
Observations gen_data(int level_ref, const DataSpec& data_spec, Stream& rng, const ModelSpec& spec = {});

struct RateFit {
  double alpha_hat = 0.0;
  double beta_hat = 0.0;
  std::vector<int> levels;
  std::vector<double> mean;           // mean of Q_l - Q_{l-1}
  std::vector<double> second_moment;  // mean of (Q_l - Q_{l-1})^2
  Eigen::VectorXd bias_residuals;
  Eigen::VectorXd variance_residuals;
  long long n_samples = 0;
};

// Least squares on log2 |mean| and log2 second moment against the level.
// Throws ConfigError for fewer than 3 levels or mismatched lengths.
RateFit fit_rates(const std::vector<int>& levels, const std::vector<double>& mean,
                  const std::vector<double>& second_moment);

// Coupled prior samples; sample i uses rng.split(i) and is solved on levels first-1 .. last.
RateFit estimate_rates(int first, int last, int n_samples, const Stream& rng, const ModelSpec& spec = {},
                       int threads = 0);

// Function of the parameters and of Q_level at a quadrature node.
struct Integrand {
  std::string name;
  std::function<double(const KernelParams&, double qoi)> fn;
  bool needs_solve = true;

  static Integrand qoi();
  static Integrand one();
  static Integrand theta();
  static Integrand theta_squared();
};

struct OracleOptions {
  // Composite panels for exponent and delta; 0 picks 1 for the prior and 32
  // for the (sharply peaked) posterior. With one panel the exponent rule is
  // plain n-point Gauss-Legendre.
  int panels = 0;
  int nodes_per_panel = 0;        // 0: max(2, nodes_per_dim / 4)
  bool check_convergence = false; // also run 2n nodes per dimension
  double tolerance = 1e-6;        // relative n vs 2n agreement for `converged`
  std::string cache_path;         // empty: $NONLOCAL_UQ_CACHE, unset: no cache
};

struct OracleResult {
  double value = 0.0;
  int nodes_per_dim = 0;
  int level = 0;
  bool converged = false;
  double refined_value = 0.0;  // 2n result when checked
  double normalizer = 1.0;     // Z_l for the posterior, 1 for the prior
  long long solves = 0;
};

// One-dimensional rules with the prior density folded into the weights.
// delta is split at the multiples of h_level, where Q has kinks, and further
// until no panel is wider than 1 / panels.
QuadratureRule<double> theta_rule(int n, const PriorSpec& prior = {});
QuadratureRule<double> exponent_rule(int panels, int nodes_per_panel, const PriorSpec& prior = {});
QuadratureRule<double> delta_rule(int level, int panels, int nodes_per_panel, const PriorSpec& prior = {},
                                  int k = 3);

// Throws ConfigError for nodes_per_dim < 8 unless only parameter integrands are used.
OracleResult prior_quadrature(int level, int nodes_per_dim, const Integrand& integrand = Integrand::qoi(),
                              const OracleOptions& options = {}, const ModelSpec& spec = {}, int threads = 0);

// Ratio of int f e^{-Phi_l} dmu and int e^{-Phi_l} dmu on one grid of solves.
OracleResult posterior_quadrature(int level, const Observations& data, int nodes_per_dim,
                                  const Integrand& integrand = Integrand::qoi(), const OracleOptions& options = {},
                                  const ModelSpec& spec = {}, int threads = 0);

// FNV-1a over the observation values, locations and noise level.
std::string data_hash(const Observations& data);

// Least-squares slope of log y against log x. Throws ConfigError for fewer
// than two points or non-positive entries.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

struct ZetaFit {
  double zeta_modeled = 0.0;
  double zeta_wall = 0.0;
  std::vector<int> levels;
  std::vector<double> seconds;  // mean wall-clock per forward solve
};

// Regresses log2 cost on -log2 h over levels first..last with n_solves prior draws per level.
ZetaFit measure_zeta(int first, int last, int n_solves, const Stream& rng, const ModelSpec& spec = {});

}  // namespace nluq
