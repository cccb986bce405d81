#include "nluq/mlmc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nluq/errors.hpp"
#include "nluq/parallel.hpp"
#include "nluq/stats.hpp"

namespace nluq {

namespace {

struct LevelSummary {
  double mean = 0.0;
  double variance = 0.0;
};

LevelSummary summarize(const std::vector<Increment>& draws) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(draws.size()));
  for (std::size_t i = 0; i < draws.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = draws[i].value;
  }
  return {sample_mean(v), sample_variance(v)};
}

std::vector<Increment> draw_level(int level, long long count, const Stream& level_rng, const ModelSpec& spec,
                                  int threads) {
  return parallel_map(
      static_cast<std::size_t>(count),
      [&](std::size_t i) {
        Stream rng = level_rng.split(i);
        return sample_increment(level, rng, spec);
      },
      threads);
}

}  // namespace

void RateTriple::validate() const {
  if (!(alpha > 0 && beta > 0 && zeta > 0)) {
    throw ConfigError("rates must be positive");
  }
  if (std::max(beta, zeta) > 2.0 * alpha) {
    std::ostringstream os;
    os << "rates violate max(beta, zeta) <= 2 alpha (alpha=" << alpha << ", beta=" << beta
       << ", zeta=" << zeta << ")";
    throw ConfigError(os.str());
  }
}

double increment_cost(int level, const ModelSpec& spec) {
  return level == 0 ? modeled_cost(0, spec) : modeled_cost(level, spec) + modeled_cost(level - 1, spec);
}

double LevelSchedule::modeled_cost(const ModelSpec& spec) const {
  double total = 0.0;
  for (int l = 0; l <= L; ++l) {
    total += static_cast<double>(counts[l]) * increment_cost(l, spec);
  }
  return total;
}

double EstimateReport::standard_error() const { return std::sqrt(variance); }

Increment increment_at(const KernelParams& params, int level, const ModelSpec& spec) {
  const ForwardResult fine = forward(params, level, spec);
  if (level == 0) {
    return {fine.qoi, fine.cost};
  }
  const ForwardResult coarse = forward(params, level - 1, spec);
  return {fine.qoi - coarse.qoi, fine.cost + coarse.cost};
}

Increment sample_increment(int level, Stream& rng, const ModelSpec& spec) {
  if (level < 0) {
    throw ConfigError("sample_increment: level must be non-negative");
  }
  return increment_at(prior_sample(rng, spec.prior), level, spec);
}

IncrementStats pilot(int max_level, int n_pilot, const Stream& rng, const ModelSpec& spec, int threads) {
  if (n_pilot < 2) {
    throw ConfigError("pilot needs at least two samples per level");
  }
  IncrementStats stats;
  for (int l = 0; l <= max_level; ++l) {
    const auto draws = draw_level(l, n_pilot, rng.split(static_cast<std::uint64_t>(l)), spec, threads);
    const LevelSummary s = summarize(draws);
    stats.n.push_back(n_pilot);
    stats.mean.push_back(s.mean);
    stats.variance.push_back(s.variance);
    stats.cost.push_back(increment_cost(l, spec));
  }
  return stats;
}

double bias_constant(const IncrementStats& stats, double alpha, int k) {
  const int top = stats.levels() - 1;
  if (top < 1) {
    throw ConfigError("bias constant needs pilot statistics on at least two levels");
  }
  double c = 0.0;
  for (int l = std::max(1, top - 1); l <= top; ++l) {
    const double h_coarse = std::ldexp(1.0, -(k + l - 1));
    c = std::max(c, std::abs(stats.mean[l]) / (std::pow(h_coarse, alpha) * (1.0 - std::exp2(-alpha))));
  }
  return c;
}

int finest_level(double bias_target, double c, double alpha, int k) {
  if (!(bias_target > 0)) {
    throw ConfigError("bias target must be positive");
  }
  int L = 0;
  while (c * std::pow(std::ldexp(1.0, -(k + L)), alpha) > bias_target) {
    ++L;
    if (L > 60) {
      throw InfeasibleSchedule("no finite level reaches the bias target");
    }
  }
  return L;
}

LevelSchedule allocate_mlmc(double eps, const RateTriple& rates, const IncrementStats& pilot_stats,
                            const MlmcOptions& options, const ModelSpec& spec) {
  if (!(eps > 0)) {
    throw ConfigError("eps must be positive");
  }
  rates.validate();
  if (pilot_stats.levels() < 1) {
    throw ConfigError("allocation needs pilot statistics");
  }
  const double c = options.bias_constant >= 0 ? options.bias_constant
                                              : bias_constant(pilot_stats, rates.alpha, spec.k);
  const int L = finest_level(eps / std::sqrt(2.0), c, rates.alpha, spec.k);
  if (L > options.max_level) {
    std::ostringstream os;
    os << "eps = " << eps << " needs L = " << L << " > max_level = " << options.max_level;
    throw InfeasibleSchedule(os.str());
  }

  const int last = pilot_stats.levels() - 1;
  std::vector<double> v(L + 1);
  std::vector<double> cost(L + 1);
  for (int l = 0; l <= L; ++l) {
    if (l <= last) {
      v[l] = pilot_stats.variance[l];
      cost[l] = pilot_stats.cost[l];
    } else {
      v[l] = pilot_stats.variance[last] * std::exp2(-rates.beta * (l - last));
      cost[l] = pilot_stats.cost[last] * std::exp2(rates.zeta * (l - last));
    }
  }
  double sum = 0.0;
  for (int l = 0; l <= L; ++l) {
    sum += std::sqrt(v[l] * cost[l]);
  }

  LevelSchedule schedule;
  schedule.L = L;
  schedule.eps = eps;
  schedule.rates = rates;
  schedule.counts.resize(L + 1);
  for (int l = 0; l <= L; ++l) {
    const double n = std::ceil(2.0 / (eps * eps) * std::sqrt(v[l] / cost[l]) * sum);
    schedule.counts[l] = std::max(options.min_count, static_cast<long long>(n));
  }
  // Non-increasing in l; raising a coarser count never increases the variance.
  for (int l = L - 1; l >= 0; --l) {
    schedule.counts[l] = std::max(schedule.counts[l], schedule.counts[l + 1]);
  }
  return schedule;
}

EstimateReport run_mlmc(const LevelSchedule& schedule, const Stream& rng, const ModelSpec& spec,
                        int threads) {
  if (static_cast<int>(schedule.counts.size()) != schedule.L + 1) {
    throw ConfigError("schedule counts must have L + 1 entries");
  }
  EstimateReport report;
  report.schedule = schedule;
  report.seed = rng.key();
  for (int l = 0; l <= schedule.L; ++l) {
    const long long n = schedule.counts[l];
    if (n < 1) {
      throw ConfigError("schedule counts must be positive");
    }
    const auto draws = draw_level(l, n, rng.split(static_cast<std::uint64_t>(l)), spec, threads);
    const LevelSummary s = summarize(draws);
    double cost = 0.0;
    for (const auto& d : draws) {
      cost += d.cost;
    }
    report.stats.n.push_back(n);
    report.stats.mean.push_back(s.mean);
    report.stats.variance.push_back(s.variance);
    report.stats.cost.push_back(cost / static_cast<double>(n));
    report.value += s.mean;
    report.total_cost += cost;
    report.variance += s.variance / static_cast<double>(n);
  }
  return report;
}

std::vector<StudyRow> mse_study(const std::vector<double>& eps_list, int n_repeats, double reference,
                                const IncrementStats& pilot_stats, const RateTriple& rates,
                                const Stream& rng, const MlmcOptions& options, const ModelSpec& spec,
                                int threads) {
  if (n_repeats < 1) {
    throw ConfigError("mse_study needs at least one repeat");
  }
  std::vector<StudyRow> rows;
  for (std::size_t e = 0; e < eps_list.size(); ++e) {
    const LevelSchedule schedule = allocate_mlmc(eps_list[e], rates, pilot_stats, options, spec);
    const Stream eps_rng = rng.split(e);
    StudyRow row;
    row.eps = eps_list[e];
    row.L = schedule.L;
    double sq = 0.0;
    double sum = 0.0;
    double cost = 0.0;
    for (int r = 0; r < n_repeats; ++r) {
      const EstimateReport rep = run_mlmc(schedule, eps_rng.split(static_cast<std::uint64_t>(r)), spec, threads);
      const double d = rep.value - reference;
      sq += d * d;
      sum += rep.value;
      cost += rep.total_cost;
    }
    row.mse = sq / n_repeats;
    row.mean_value = sum / n_repeats;
    row.mean_cost = cost / n_repeats;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace nluq
