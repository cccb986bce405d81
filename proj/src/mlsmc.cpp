#include "nluq/mlsmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "nluq/errors.hpp"
#include "nluq/parallel.hpp"
#include "nluq/stats.hpp"

namespace nluq {

namespace {

constexpr std::uint64_t kBootstrapStream = 0xB007;
constexpr std::uint64_t kResampleStream = 0x5E5A;
constexpr std::uint64_t kMutateStream = 0x3017;
constexpr std::uint64_t kPriorStream = 0x9410;

double level_h(int level, int k) { return std::ldexp(1.0, -(k + level)); }

Eigen::VectorXd qoi_of(const Ensemble& e, bool next) {
  Eigen::VectorXd q(static_cast<Eigen::Index>(e.size()));
  for (std::size_t i = 0; i < e.size(); ++i) {
    q(static_cast<Eigen::Index>(i)) = next ? e.particles[i].next.qoi : e.particles[i].current.qoi;
  }
  return q;
}

Eigen::VectorXd log_weights_of(const Ensemble& e) {
  Eigen::VectorXd lw(static_cast<Eigen::Index>(e.size()));
  for (std::size_t i = 0; i < e.size(); ++i) {
    lw(static_cast<Eigen::Index>(i)) = log_weight(e.particles[i].current, e.particles[i].next);
  }
  return lw;
}

// log of the mean of exp(lw).
double log_mean_exp(const Eigen::VectorXd& lw) {
  const double m = lw.maxCoeff();
  return m + std::log((lw.array() - m).exp().mean());
}

void require_ess(const Ensemble& e, double min_ess, const Eigen::VectorXd& lw) {
  if (!(e.ess >= min_ess)) {
    std::ostringstream os;
    os << "particle degeneracy at level " << e.level << ": ESS = " << e.ess << " of N = " << e.size()
       << ", log-weight range [" << lw.minCoeff() << ", " << lw.maxCoeff() << "]";
    throw DegenerateEnsemble(os.str());
  }
}

// Fill `next` on every particle with an evaluation at level + 1.
void evaluate_next(Ensemble& e, const Observations& data, const ForwardFn& model, int threads) {
  auto evals = parallel_map(
      e.size(),
      [&](std::size_t i) { return evaluate_potential(e.particles[i].current.params, e.level + 1, data, model); },
      threads);
  for (std::size_t i = 0; i < e.size(); ++i) {
    e.cost += evals[i].cost;
    e.particles[i].next = std::move(evals[i]);
  }
}

// Resampled population moved to the next level: `next` becomes `current`.
Ensemble advance(const Ensemble& weighted, long long n_out, Stream& rng) {
  Ensemble out = resample_systematic(weighted, rng, n_out);
  out.level = weighted.level + 1;
  for (auto& p : out.particles) {
    p.current = p.next;
    p.next = PotentialEval{};
  }
  out.cost = 0.0;
  return out;
}

// Particles descending from one level-0 prior draw are resampled together,
// so duplicates created by resampling do not count as independent.
double bootstrap_variance(int b, const Ensemble& e, Stream rng,
                          const std::function<double(const std::vector<std::size_t>&)>& stat) {
  if (b < 2 || e.size() < 2) {
    return 0.0;
  }
  std::map<int, std::vector<std::size_t>> by_ancestor;
  for (std::size_t i = 0; i < e.size(); ++i) {
    by_ancestor[e.particles[i].ancestor].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> groups;
  for (const auto& [a, members] : by_ancestor) {
    groups.push_back(&members);
  }
  if (groups.size() < 2) {
    return std::numeric_limits<double>::infinity();
  }
  Eigen::VectorXd values(b);
  std::vector<std::size_t> idx;
  idx.reserve(2 * e.size());
  std::uniform_int_distribution<std::size_t> pick(0, groups.size() - 1);
  for (int r = 0; r < b; ++r) {
    idx.clear();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& members = *groups[pick(rng)];
      idx.insert(idx.end(), members.begin(), members.end());
    }
    values(r) = stat(idx);
  }
  return sample_variance(values);
}

}  // namespace

void Observations::validate() const {
  if (!(sigma2 > 0)) {
    throw ConfigError("observation noise variance must be positive");
  }
  if (static_cast<std::size_t>(y.size()) != locations.size()) {
    throw DimensionMismatch("observation vector and locations differ in length");
  }
  for (double x : locations) {
    if (!(x > 0 && x < 1)) {
      throw ConfigError("observation locations must lie in (0, 1)");
    }
  }
}

double phi(const Eigen::VectorXd& obs, const Observations& data) {
  if (obs.size() != data.y.size()) {
    std::ostringstream os;
    os << "phi: got " << obs.size() << " observations, data has " << data.y.size();
    throw DimensionMismatch(os.str());
  }
  return 0.5 * (obs - data.y).squaredNorm() / data.sigma2;
}

ForwardFn default_forward(const ModelSpec& spec) {
  return [spec](const KernelParams& params, int level) { return forward(params, level, spec); };
}

PotentialEval evaluate_potential(const KernelParams& params, int level, const Observations& data,
                                 const ForwardFn& model) {
  const ForwardResult r = model(params, level);
  PotentialEval out;
  out.params = params;
  out.level = level;
  out.obs = r.obs;
  out.qoi = r.qoi;
  out.phi = phi(r.obs, data);
  out.cost = r.cost;
  return out;
}

double log_weight(const PotentialEval& at_level, const PotentialEval& at_next) {
  return at_level.phi - at_next.phi;
}

double log_weight(const KernelParams& params, int level, const Observations& data, const ModelSpec& spec) {
  if (level < 0) {
    throw ConfigError("log_weight: level must be non-negative");
  }
  ModelSpec s = spec;
  s.obs_locations = data.locations;
  const ForwardFn model = default_forward(s);
  return log_weight(evaluate_potential(params, level, data, model),
                    evaluate_potential(params, level + 1, data, model));
}

double normalize_log_weights(const Eigen::VectorXd& log_w, Eigen::VectorXd& weights) {
  const double m = log_w.maxCoeff();
  if (!std::isfinite(m)) {
    weights = Eigen::VectorXd::Zero(log_w.size());
    return 0.0;
  }
  weights = (log_w.array() - m).exp().matrix();
  weights /= weights.sum();
  return 1.0 / weights.squaredNorm();
}

double log_target(const Eigen::Vector3d& u, double phi_value, const PriorSpec& prior) {
  const KernelParams p = from_unbounded(u, prior);
  if (!in_support(p, prior)) {
    return -std::numeric_limits<double>::infinity();
  }
  return prior_logpdf(p, prior) + log_jacobian(u, prior) - phi_value;
}

double acceptance_probability(double log_target_current, double log_target_proposal) {
  const double d = log_target_proposal - log_target_current;
  if (std::isnan(d)) {
    return 0.0;
  }
  return d >= 0 ? 1.0 : std::exp(d);
}

std::vector<std::size_t> systematic_indices(const Eigen::VectorXd& weights, std::size_t n_out, double u) {
  std::vector<std::size_t> idx(n_out);
  const auto n_in = static_cast<std::size_t>(weights.size());
  if (n_in == 0) {
    throw DegenerateEnsemble("cannot resample an empty population");
  }
  double cum = weights(0) * static_cast<double>(n_out);
  std::size_t j = 0;
  for (std::size_t m = 0; m < n_out; ++m) {
    const double point = static_cast<double>(m) + u;
    while (point >= cum && j + 1 < n_in) {
      ++j;
      cum += weights(static_cast<Eigen::Index>(j)) * static_cast<double>(n_out);
    }
    idx[m] = j;
  }
  return idx;
}

Ensemble resample_systematic(const Ensemble& ensemble, Stream& rng, long long n_out) {
  const std::size_t n = n_out < 0 ? ensemble.size() : static_cast<std::size_t>(n_out);
  const auto idx = systematic_indices(ensemble.weights, n, uniform01(rng));
  Ensemble out;
  out.level = ensemble.level;
  out.particles.reserve(n);
  for (std::size_t i : idx) {
    out.particles.push_back(ensemble.particles[i]);
  }
  out.weights = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), 1.0 / static_cast<double>(n));
  out.ess = static_cast<double>(n);
  out.acceptance = ensemble.acceptance;
  out.cost = ensemble.cost;
  return out;
}

Eigen::Matrix3d proposal_covariance(const Ensemble& ensemble, const MutationConfig& config,
                                    const PriorSpec& prior) {
  const auto n = static_cast<Eigen::Index>(ensemble.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  if (n >= 2) {
    Eigen::MatrixXd u(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      u.row(i) = to_unbounded(ensemble.particles[static_cast<std::size_t>(i)].current.params, prior).transpose();
    }
    const Eigen::MatrixXd centered = u.rowwise() - u.colwise().mean();
    cov = centered.transpose() * centered / static_cast<double>(n - 1);
  }
  return config.scale * config.scale * cov + config.floor * Eigen::Matrix3d::Identity();
}

Ensemble mutate(const Ensemble& ensemble, int steps, const Observations& data, const MutationConfig& config,
                const Stream& rng, const ForwardFn& model, const PriorSpec& prior, int threads) {
  if (steps <= 0 || ensemble.size() == 0) {
    return ensemble;
  }
  const Eigen::Matrix3d chol = proposal_covariance(ensemble, config, prior).llt().matrixL();
  struct Moved {
    Particle particle;
    int accepted = 0;
    double cost = 0.0;
  };
  const auto moved = parallel_map(
      ensemble.size(),
      [&](std::size_t i) {
        Stream r = rng.split(i);
        std::normal_distribution<double> normal;
        Moved m{ensemble.particles[i], 0, 0.0};
        PotentialEval& cur = m.particle.current;
        Eigen::Vector3d u = to_unbounded(cur.params, prior);
        double lt = log_target(u, cur.phi, prior);
        for (int s = 0; s < steps; ++s) {
          Eigen::Vector3d z;
          for (int c = 0; c < 3; ++c) {
            z(c) = normal(r);
          }
          const Eigen::Vector3d u_new = u + chol * z;
          const double log_u = std::log(uniform01(r));
          const KernelParams p_new = from_unbounded(u_new, prior);
          if (!in_support(p_new, prior)) {
            continue;
          }
          PotentialEval cand = evaluate_potential(p_new, cur.level, data, model);
          m.cost += cand.cost;
          const double lt_new = log_target(u_new, cand.phi, prior);
          if (log_u < std::log(acceptance_probability(lt, lt_new))) {
            cur = std::move(cand);
            u = u_new;
            lt = lt_new;
            ++m.accepted;
          }
        }
        return m;
      },
      threads);

  Ensemble out;
  out.level = ensemble.level;
  out.weights = ensemble.weights;
  out.ess = ensemble.ess;
  out.cost = ensemble.cost;
  long long accepted = 0;
  out.particles.reserve(moved.size());
  for (const auto& m : moved) {
    out.particles.push_back(m.particle);
    accepted += m.accepted;
    out.cost += m.cost;
  }
  out.acceptance = static_cast<double>(accepted) / (static_cast<double>(steps) * static_cast<double>(moved.size()));
  return out;
}

Ensemble init_level0(long long n0, const Observations& data, const MlsmcOptions& options, const Stream& rng,
                     const ForwardFn& model, const PriorSpec& prior, int threads) {
  if (n0 < 2) {
    throw ConfigError("init_level0: N0 must be at least 2");
  }
  data.validate();
  const Stream prior_rng = rng.split(kPriorStream);
  auto evals = parallel_map(
      static_cast<std::size_t>(n0),
      [&](std::size_t i) {
        Stream r = prior_rng.split(i);
        return evaluate_potential(prior_sample(r, prior), 0, data, model);
      },
      threads);

  Ensemble e;
  e.level = 0;
  e.particles.resize(evals.size());
  Eigen::VectorXd lw(static_cast<Eigen::Index>(evals.size()));
  for (std::size_t i = 0; i < evals.size(); ++i) {
    e.cost += evals[i].cost;
    lw(static_cast<Eigen::Index>(i)) = -evals[i].phi;
    e.particles[i].current = std::move(evals[i]);
    e.particles[i].ancestor = static_cast<int>(i);
  }
  e.ess = normalize_log_weights(lw, e.weights);
  if (e.ess == 0.0) {
    std::ostringstream os;
    os << "all level-0 weights underflow (max phi = " << (-lw).maxCoeff() << ")";
    throw DegenerateEnsemble(os.str());
  }
  require_ess(e, options.min_ess, lw);
  Stream resample_rng = rng.split(kResampleStream);
  Ensemble out = resample_systematic(e, resample_rng);
  return mutate(out, options.mutation.init_steps, data, options.mutation, rng.split(kMutateStream), model, prior,
                threads);
}

double increment_term(const Eigen::VectorXd& log_g, const Eigen::VectorXd& phi_next,
                      const Eigen::VectorXd& phi_prev) {
  if (log_g.size() != phi_next.size() || log_g.size() != phi_prev.size() || log_g.size() == 0) {
    throw DimensionMismatch("increment_term: inconsistent particle counts");
  }
  const Eigen::ArrayXd g = (log_g.array() - log_g.maxCoeff()).exp();
  // centred on one value so a constant phi gives exactly 0
  const double c = phi_prev(0);
  double num = 0.0;
  double den = 0.0;
  double prev = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    num += g(i) * (phi_next(i) - c);
    den += g(i);
    prev += phi_prev(i) - c;
  }
  return num / den - prev / static_cast<double>(g.size());
}

double k_sum(int L, const RateTriple& rates, int k) {
  double s = 0.0;
  for (int l = 0; l <= L; ++l) {
    s += std::pow(level_h(l, k), 0.5 * (rates.beta - rates.zeta));
  }
  return s;
}

LevelSchedule allocate_mlsmc(double eps, const RateTriple& rates, const MlsmcConstants& constants,
                             const MlsmcOptions& options, int k) {
  if (!(eps > 0)) {
    throw ConfigError("eps must be positive");
  }
  rates.validate();
  if (!(constants.count > 0) || !(constants.bias >= 0)) {
    throw ConfigError("allocation constants must be positive");
  }
  const int L = finest_level(eps, constants.bias, rates.alpha, k);
  if (L > options.max_level) {
    std::ostringstream os;
    os << "eps = " << eps << " needs L = " << L << " > max_level = " << options.max_level;
    throw InfeasibleSchedule(os.str());
  }
  LevelSchedule s;
  s.L = L;
  s.eps = eps;
  s.rates = rates;
  s.counts.resize(L + 1);
  const double kl = k_sum(L, rates, k);
  for (int l = 0; l <= L; ++l) {
    const double n =
        std::ceil(constants.count / (eps * eps) * kl * std::pow(level_h(l, k), 0.5 * (rates.beta + rates.zeta)));
    s.counts[l] = std::max(options.min_particles, static_cast<long long>(n));
  }
  for (int l = L - 1; l >= 0; --l) {
    s.counts[l] = std::max(s.counts[l], s.counts[l + 1]);
  }
  return s;
}

double calibrate_count_constant(int L, const RateTriple& rates, const std::vector<double>& v_terms, int k) {
  if (v_terms.empty()) {
    throw ConfigError("count calibration needs pilot variances");
  }
  const int last = static_cast<int>(v_terms.size()) - 1;
  auto term = [&](int l) {
    return l <= last ? v_terms[l] : v_terms[last] * std::exp2(-rates.beta * (l - last));
  };
  // Population l carries the level-0 term (l = 0) and increment l + 1.
  const double kl = k_sum(L, rates, k);
  double sum = 0.0;
  for (int l = 0; l <= std::max(0, L - 1); ++l) {
    const double v = (l == 0 ? term(0) : 0.0) + (l + 1 <= L ? term(l + 1) : 0.0);
    sum += v / (kl * std::pow(level_h(l, k), 0.5 * (rates.beta + rates.zeta)));
  }
  return 2.0 * sum;
}

std::vector<double> term_variances(const MlsmcReport& pilot_report) {
  std::vector<double> v;
  for (const auto& d : pilot_report.levels) {
    v.push_back(d.influence_var);
  }
  return v;
}

LevelSchedule plan_mlsmc(double eps, const RateTriple& rates, const MlsmcReport& pilot_report,
                         const MlsmcOptions& options, int k) {
  const auto& lv = pilot_report.levels;
  if (lv.size() < 3) {
    throw ConfigError("MLSMC planning needs a pilot with at least two increments");
  }
  IncrementStats inc;
  for (const auto& d : lv) {
    inc.mean.push_back(d.term);
  }
  MlsmcConstants c;
  c.bias = bias_constant(inc, rates.alpha, k);
  const int L = finest_level(eps, c.bias, rates.alpha, k);
  c.count = calibrate_count_constant(L, rates, term_variances(pilot_report), k);
  return allocate_mlsmc(eps, rates, c, options, k);
}

MlsmcReport run_mlsmc(const LevelSchedule& schedule, const Observations& data, const MlsmcOptions& options,
                      const Stream& rng, const ModelSpec& spec, int threads) {
  ModelSpec s = spec;
  s.obs_locations = data.locations;
  return run_mlsmc(schedule, data, options, rng, default_forward(s), s.prior, threads);
}

MlsmcReport run_mlsmc(const LevelSchedule& schedule, const Observations& data, const MlsmcOptions& options,
                      const Stream& rng, const ForwardFn& model, const PriorSpec& prior, int threads) {
  const int L = schedule.L;
  if (L < 0 || static_cast<int>(schedule.counts.size()) != L + 1) {
    throw ConfigError("schedule counts must have L + 1 entries");
  }
  data.validate();
  MlsmcReport report;
  report.estimate.schedule = schedule;
  report.estimate.seed = rng.key();
  const Stream boot_rng = rng.split(kBootstrapStream);

  Ensemble e = init_level0(schedule.counts[0], data, options, rng.split(0), model, prior, threads);
  double cost = e.cost;
  {
    const Eigen::VectorXd q = qoi_of(e, false);
    LevelDiagnostics d;
    d.level = 0;
    d.n = static_cast<long long>(e.size());
    d.ess = static_cast<double>(e.size());
    d.acceptance = e.acceptance;
    d.term = sample_mean(q);
    d.influence_var = sample_variance(q);
    d.bootstrap_var = bootstrap_variance(options.bootstrap, e, boot_rng.split(0),
                                         [&](const std::vector<std::size_t>& idx) {
                                           double s = 0.0;
                                           for (auto i : idx) s += q(static_cast<Eigen::Index>(i));
                                           return s / static_cast<double>(idx.size());
                                         });
    report.levels.push_back(d);
  }

  for (int l = 1; l <= L; ++l) {
    e.cost = 0.0;
    evaluate_next(e, data, model, threads);
    cost += e.cost;
    const Eigen::VectorXd lw = log_weights_of(e);
    const Eigen::VectorXd q_next = qoi_of(e, true);
    const Eigen::VectorXd q_prev = qoi_of(e, false);
    e.ess = normalize_log_weights(lw, e.weights);
    require_ess(e, options.min_ess, lw);

    LevelDiagnostics d;
    d.level = l;
    d.n = static_cast<long long>(e.size());
    d.ess = e.ess;
    d.min_log_weight = lw.minCoeff();
    d.max_log_weight = lw.maxCoeff();
    d.term = increment_term(lw, q_next, q_prev);
    d.log_mean_weight = log_mean_exp(lw);
    {
      // Per-particle influence of the self-normalized increment.
      const Eigen::ArrayXd g = (lw.array() - d.log_mean_weight).exp();
      const double ratio = (g * q_next.array()).sum() / g.sum();
      const double m = q_prev.mean();
      const Eigen::ArrayXd psi = g * (q_next.array() - ratio) - (q_prev.array() - m);
      d.influence_var = psi.square().mean();
    }
    d.bootstrap_var = bootstrap_variance(
        options.bootstrap, e, boot_rng.split(static_cast<std::uint64_t>(l)),
        [&](const std::vector<std::size_t>& idx) {
          Eigen::VectorXd a(static_cast<Eigen::Index>(idx.size()));
          Eigen::VectorXd b(a.size());
          Eigen::VectorXd c(a.size());
          for (std::size_t j = 0; j < idx.size(); ++j) {
            const auto i = static_cast<Eigen::Index>(idx[j]);
            a(static_cast<Eigen::Index>(j)) = lw(i);
            b(static_cast<Eigen::Index>(j)) = q_next(i);
            c(static_cast<Eigen::Index>(j)) = q_prev(i);
          }
          return increment_term(a, b, c);
        });
    report.log_normalizer_ratio += d.log_mean_weight;

    if (l < L) {
      Stream r = rng.split(static_cast<std::uint64_t>(l)).split(kResampleStream);
      e = advance(e, schedule.counts[l], r);
      e = mutate(e, options.mutation.steps, data, options.mutation,
                 rng.split(static_cast<std::uint64_t>(l)).split(kMutateStream), model, prior, threads);
      cost += e.cost;
      d.acceptance = e.acceptance;
    }
    report.levels.push_back(d);
  }

  double var = 0.0;
  for (const auto& d : report.levels) {
    report.estimate.value += d.term;
    var += d.bootstrap_var;
    report.estimate.stats.n.push_back(d.n);
    report.estimate.stats.mean.push_back(d.term);
    report.estimate.stats.variance.push_back(d.influence_var);
    report.estimate.stats.cost.push_back(0.0);
  }
  report.estimate.total_cost = cost;
  report.estimate.variance = var;
  report.bootstrap_se = std::sqrt(var);
  return report;
}

MlsmcReport run_pilot_mlsmc(int max_level, long long n, const Observations& data, const MlsmcOptions& options,
                            const Stream& rng, const ModelSpec& spec, int threads) {
  LevelSchedule s;
  s.L = max_level;
  s.counts.assign(static_cast<std::size_t>(max_level + 1), n);
  return run_mlsmc(s, data, options, rng, spec, threads);
}

SingleLevelReport run_single_level_smc(int L, long long n, const Observations& data, const MlsmcOptions& options,
                                       const Stream& rng, const ModelSpec& spec, int threads) {
  if (L < 0 || n < 2) {
    throw ConfigError("single-level SMC needs L >= 0 and N >= 2");
  }
  ModelSpec s = spec;
  s.obs_locations = data.locations;
  const ForwardFn model = default_forward(s);
  Ensemble e = init_level0(n, data, options, rng.split(0), model, s.prior, threads);
  double cost = e.cost;
  for (int l = 1; l <= L; ++l) {
    e.cost = 0.0;
    evaluate_next(e, data, model, threads);
    const Eigen::VectorXd lw = log_weights_of(e);
    e.ess = normalize_log_weights(lw, e.weights);
    require_ess(e, options.min_ess, lw);
    cost += e.cost;
    Stream r = rng.split(static_cast<std::uint64_t>(l)).split(kResampleStream);
    e = advance(e, n, r);
    e = mutate(e, options.mutation.steps, data, options.mutation,
               rng.split(static_cast<std::uint64_t>(l)).split(kMutateStream), model, s.prior, threads);
    cost += e.cost;
  }
  SingleLevelReport out;
  out.value = sample_mean(qoi_of(e, false));
  out.total_cost = cost;
  out.n = n;
  out.L = L;
  return out;
}

double single_level_cost_per_particle(int L, const MlsmcOptions& options, const ModelSpec& spec) {
  double c = (1.0 + options.mutation.init_steps) * modeled_cost(0, spec);
  for (int l = 1; l <= L; ++l) {
    c += (1.0 + options.mutation.steps) * modeled_cost(l, spec);
  }
  return c;
}

std::vector<StudyRow> mlsmc_mse_study(const std::vector<double>& eps_list, int n_repeats, double reference,
                                      const MlsmcReport& pilot_report, const RateTriple& rates,
                                      const Observations& data, const Stream& rng, const MlsmcOptions& options,
                                      const ModelSpec& spec, int threads) {
  if (n_repeats < 1) {
    throw ConfigError("mlsmc_mse_study needs at least one repeat");
  }
  std::vector<StudyRow> rows;
  for (std::size_t e = 0; e < eps_list.size(); ++e) {
    const LevelSchedule schedule = plan_mlsmc(eps_list[e], rates, pilot_report, options, spec.k);
    const Stream eps_rng = rng.split(e);
    StudyRow row;
    row.eps = eps_list[e];
    row.L = schedule.L;
    double sq = 0.0;
    double sum = 0.0;
    double cost = 0.0;
    for (int r = 0; r < n_repeats; ++r) {
      const MlsmcReport rep =
          run_mlsmc(schedule, data, options, eps_rng.split(static_cast<std::uint64_t>(r)), spec, threads);
      const double d = rep.estimate.value - reference;
      sq += d * d;
      sum += rep.estimate.value;
      cost += rep.estimate.total_cost;
    }
    row.mse = sq / n_repeats;
    row.mean_value = sum / n_repeats;
    row.mean_cost = cost / n_repeats;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace nluq
