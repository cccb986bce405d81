#pragma once

// Multilevel sequential Monte Carlo for posterior expectations of Q.
//
// Targets eta_l(d lambda) ~ exp(-Phi(G_l(lambda))) mu(d lambda). A
// population at level l - 1 is importance weighted by
// G_{l-1} = exp(Phi_{l-1} - Phi_l), resampled systematically and moved by
// random-walk Metropolis in logit coordinates. The estimator is
//
//   eta_0(Q_0) + sum_{l=1}^{L} [ eta_{l-1}(G_{l-1} Q_l) / eta_{l-1}(G_{l-1}) - eta_{l-1}(Q_{l-1}) ].

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "nluq/mlmc.hpp"
#include "nluq/nonlocal_fem.hpp"
#include "nluq/rng.hpp"

namespace nluq {

struct Observations {
  Eigen::VectorXd y;
  std::vector<double> locations{0.25, 0.75};
  double sigma2 = 0.01;

  // Throws ConfigError / DimensionMismatch.
  void validate() const;
};

// 0.5 * |obs - y|^2 / sigma2. Throws DimensionMismatch on length mismatch.
double phi(const Eigen::VectorXd& obs, const Observations& data);

// Forward map used by the sampler; replaceable for testing.
using ForwardFn = std::function<ForwardResult(const KernelParams&, int level)>;
ForwardFn default_forward(const ModelSpec& spec);

struct PotentialEval {
  KernelParams params;
  int level = 0;
  Eigen::VectorXd obs;
  double qoi = 0.0;
  double phi = 0.0;
  double cost = 0.0;
};

PotentialEval evaluate_potential(const KernelParams& params, int level, const Observations& data,
                                 const ForwardFn& model);

// Phi_l - Phi_{l+1}, i.e. log G_l.
double log_weight(const PotentialEval& at_level, const PotentialEval& at_next);
double log_weight(const KernelParams& params, int level, const Observations& data,
                  const ModelSpec& spec = {});

struct Particle {
  PotentialEval current;  // at the ensemble level
  PotentialEval next;     // at level + 1, filled when weighting
  int ancestor = 0;       // index of the level-0 prior draw it descends from
};

struct Ensemble {
  int level = 0;
  std::vector<Particle> particles;
  Eigen::VectorXd weights;  // normalized
  double ess = 0.0;
  double acceptance = 1.0;  // mean Metropolis acceptance of the last mutation
  double cost = 0.0;        // modeled cost spent on this population so far

  std::size_t size() const { return particles.size(); }
};

struct MutationConfig {
  int steps = 5;          // J at levels >= 1
  int init_steps = 10;    // J at level 0
  double scale = 1.3741;  // proposal covariance = scale^2 * ensemble covariance + floor * I
  double floor = 1e-8;
};

// Normalizes log weights in place of a population; returns ESS = 1 / sum w^2.
double normalize_log_weights(const Eigen::VectorXd& log_w, Eigen::VectorXd& weights);

// log of the level-l target density in unbounded coordinates (up to a constant).
double log_target(const Eigen::Vector3d& u, double phi_value, const PriorSpec& prior = {});

// Metropolis acceptance probability min{1, exp(proposal - current)}.
double acceptance_probability(double log_target_current, double log_target_proposal);

// Systematic resampling indices for normalized weights w with offset u in (0, 1).
std::vector<std::size_t> systematic_indices(const Eigen::VectorXd& weights, std::size_t n_out, double u);

// n_out < 0 keeps the population size.
Ensemble resample_systematic(const Ensemble& ensemble, Stream& rng, long long n_out = -1);

// Proposal covariance from the current (equal-weighted) population.
Eigen::Matrix3d proposal_covariance(const Ensemble& ensemble, const MutationConfig& config,
                                    const PriorSpec& prior = {});

// `steps` Metropolis moves per particle targeting eta_level; particle i uses rng.split(i).
Ensemble mutate(const Ensemble& ensemble, int steps, const Observations& data, const MutationConfig& config,
                const Stream& rng, const ForwardFn& model, const PriorSpec& prior = {}, int threads = 0);

struct MlsmcOptions {
  MutationConfig mutation;
  long long min_particles = 20;  // floor on every population size
  double min_ess = 2.0;
  int bootstrap = 200;
  int max_level = 6;
};

// Prior draws weighted by exp(-Phi_0), resampled, then moved init_steps times.
// Throws DegenerateEnsemble if every weight underflows or ESS < options.min_ess.
Ensemble init_level0(long long n0, const Observations& data, const MlsmcOptions& options, const Stream& rng,
                     const ForwardFn& model, const PriorSpec& prior = {}, int threads = 0);

// Self-normalized increment (sum g phi_next) / (sum g) - (sum phi_prev) / N with g = exp(log_g - max).
double increment_term(const Eigen::VectorXd& log_g, const Eigen::VectorXd& phi_next,
                      const Eigen::VectorXd& phi_prev);

struct LevelDiagnostics {
  int level = 0;  // term index: 0 is eta_0(Q_0), l >= 1 the increment weighted from level l - 1
  long long n = 0;   // size of the population the term is computed from
  double ess = 0.0;  // before resampling
  double acceptance = 0.0;  // Metropolis acceptance of the level-l moves (0 at the last level)
  double min_log_weight = 0.0;
  double max_log_weight = 0.0;
  double term = 0.0;            // eta_0(Q_0) for the first row, else the increment
  double bootstrap_var = 0.0;   // variance of `term` over particle bootstrap
  double influence_var = 0.0;   // per-particle asymptotic variance proxy
  double log_mean_weight = 0.0; // log eta_l^N(G_l)
};

struct MlsmcReport {
  EstimateReport estimate;  // value, schedule, stats, total_cost, seed
  std::vector<LevelDiagnostics> levels;
  double log_normalizer_ratio = 0.0;  // sum_l log eta_l^N(G_l)
  double bootstrap_se = 0.0;
};

// K_L = sum_{l=0}^{L} h_l^{(beta - zeta) / 2}.
double k_sum(int L, const RateTriple& rates, int k = 3);

struct MlsmcConstants {
  double bias = 1.0;   // L = smallest level with bias * h_L^alpha <= eps
  double count = 1.0;  // N_l = ceil(count * eps^-2 K_L h_l^{(beta + zeta) / 2})
};

LevelSchedule allocate_mlsmc(double eps, const RateTriple& rates, const MlsmcConstants& constants = {},
                             const MlsmcOptions& options = {}, int k = 3);

// Count constant that puts V_0/N_0 + sum_l V_l/N_{l-1} at eps^2 / 2 given
// per-term variance proxies v_terms[l] (V_0, then increments; extrapolated by beta).
double calibrate_count_constant(int L, const RateTriple& rates, const std::vector<double>& v_terms, int k = 3);

// influence_var of every term of a pilot report.
std::vector<double> term_variances(const MlsmcReport& pilot_report);

// Pilot MLSMC (n particles at every level up to max_level), then L and the
// count constant calibrated from it.
LevelSchedule plan_mlsmc(double eps, const RateTriple& rates, const MlsmcReport& pilot_report,
                         const MlsmcOptions& options = {}, int k = 3);
MlsmcReport run_pilot_mlsmc(int max_level, long long n, const Observations& data, const MlsmcOptions& options,
                            const Stream& rng, const ModelSpec& spec = {}, int threads = 0);

// Throws DegenerateEnsemble when a population's ESS drops below options.min_ess.
MlsmcReport run_mlsmc(const LevelSchedule& schedule, const Observations& data, const MlsmcOptions& options,
                      const Stream& rng, const ModelSpec& spec = {}, int threads = 0);
MlsmcReport run_mlsmc(const LevelSchedule& schedule, const Observations& data, const MlsmcOptions& options,
                      const Stream& rng, const ForwardFn& model, const PriorSpec& prior = {}, int threads = 0);

// Equal-N SMC through levels 0..L estimating eta_L^N(Q_L).
struct SingleLevelReport {
  double value = 0.0;
  double total_cost = 0.0;
  long long n = 0;
  int L = 0;
};
SingleLevelReport run_single_level_smc(int L, long long n, const Observations& data, const MlsmcOptions& options,
                                       const Stream& rng, const ModelSpec& spec = {}, int threads = 0);

// Modeled cost per particle of the single-level sampler, for cost matching.
double single_level_cost_per_particle(int L, const MlsmcOptions& options, const ModelSpec& spec = {});

// For every eps: plan from the shared pilot and run n_repeats samplers
// (repeat r uses rng.split(eps index).split(r)); MSE against `reference`.
std::vector<StudyRow> mlsmc_mse_study(const std::vector<double>& eps_list, int n_repeats, double reference,
                                      const MlsmcReport& pilot_report, const RateTriple& rates,
                                      const Observations& data, const Stream& rng,
                                      const MlsmcOptions& options = {}, const ModelSpec& spec = {},
                                      int threads = 0);

}  // namespace nluq
