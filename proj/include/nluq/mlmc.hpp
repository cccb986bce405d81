#pragma once

// Multilevel Monte Carlo for prior expectations of Q = u(0.5).
//
// Increments Y_l = Q_l - Q_{l-1} share one prior draw across the two
// levels (Q_{-1} = 0). Allocation follows the classical variance/cost
// balance with half of eps^2 given to the squared bias.

#include <cstdint>
#include <vector>

#include "nluq/nonlocal_fem.hpp"
#include "nluq/rng.hpp"

namespace nluq {

struct RateTriple {
  double alpha = 2.0;  // bias
  double beta = 4.0;   // increment variance
  double zeta = 3.0;   // cost

  // Throws ConfigError unless all rates are positive and max(beta, zeta) <= 2 alpha.
  void validate() const;
};

// Per-level statistics; entry 0 is plain Q_0.
struct IncrementStats {
  std::vector<long long> n;
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> cost;  // modeled cost of one increment

  int levels() const { return static_cast<int>(mean.size()); }
};

struct LevelSchedule {
  int L = 0;
  std::vector<long long> counts;  // N_0 .. N_L
  double eps = 0.0;
  RateTriple rates;

  // sum_l N_l C_l with the modeled increment costs
  double modeled_cost(const ModelSpec& spec = {}) const;
};

struct EstimateReport {
  double value = 0.0;
  LevelSchedule schedule;
  IncrementStats stats;
  double total_cost = 0.0;
  double variance = 0.0;  // sum_l V_l / N_l from the run itself
  std::uint64_t seed = 0;

  double standard_error() const;
};

struct Increment {
  double value = 0.0;
  double cost = 0.0;
};

// Modeled cost of one level-l increment (two solves for l >= 1).
double increment_cost(int level, const ModelSpec& spec = {});

// Draws lambda from the prior and returns Q_l(lambda) - Q_{l-1}(lambda).
Increment sample_increment(int level, Stream& rng, const ModelSpec& spec = {});

// Same increment at a fixed parameter.
Increment increment_at(const KernelParams& params, int level, const ModelSpec& spec = {});

// n_pilot independent increments at each level 0..max_level; sample i of
// level l uses rng.split(l).split(i).
IncrementStats pilot(int max_level, int n_pilot, const Stream& rng, const ModelSpec& spec = {},
                     int threads = 0);

// Richardson-style constant c with |E(Q_l - Q)| ~ c h_l^alpha, from the
// means of the two finest pilot levels: |mean Y_l| / (h_{l-1}^alpha (1 - 2^-alpha)).
double bias_constant(const IncrementStats& stats, double alpha, int k = 3);

// Smallest L >= 0 with c h_L^alpha <= bias_target.
int finest_level(double bias_target, double c, double alpha, int k = 3);

struct MlmcOptions {
  int max_level = 6;
  long long min_count = 2;
  double bias_constant = -1.0;  // negative: estimate from the pilot
};

// Throws InfeasibleSchedule when L would exceed options.max_level.
LevelSchedule allocate_mlmc(double eps, const RateTriple& rates, const IncrementStats& pilot_stats,
                            const MlmcOptions& options = {}, const ModelSpec& spec = {});

// Level l sample i uses rng.split(l).split(i).
EstimateReport run_mlmc(const LevelSchedule& schedule, const Stream& rng, const ModelSpec& spec = {},
                        int threads = 0);

struct StudyRow {
  double eps = 0.0;
  int L = 0;
  double mean_cost = 0.0;
  double mse = 0.0;
  double mean_value = 0.0;
};

// For every eps: allocate from the shared pilot, run n_repeats independent
// estimators (repeat r uses rng.split(eps index).split(r)) and measure the
// empirical MSE against `reference`.
std::vector<StudyRow> mse_study(const std::vector<double>& eps_list, int n_repeats, double reference,
                                const IncrementStats& pilot_stats, const RateTriple& rates,
                                const Stream& rng, const MlmcOptions& options = {},
                                const ModelSpec& spec = {}, int threads = 0);

}  // namespace nluq
