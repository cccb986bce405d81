#include "nluq/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <optional>
#include <random>
#include <sstream>

#include "nluq/errors.hpp"
#include "nluq/parallel.hpp"
#include "nluq/stats.hpp"

namespace nluq {

namespace {

using json = nlohmann::json;

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

std::string spec_key(const ModelSpec& spec) {
  std::ostringstream os;
  os << std::setprecision(17) << to_string(spec.f_variant) << ',' << spec.forcing << ',' << spec.k << ','
     << spec.qoi_location << ',' << spec.quadrature.regular << ',' << spec.quadrature.singular << ','
     << spec.quadrature.inner << ',' << spec.prior.theta_range.lo << ',' << spec.prior.theta_range.hi << ','
     << spec.prior.exponent_beta[0] << ',' << spec.prior.exponent_beta[1] << ',' << spec.prior.delta_rate << ','
     << spec.prior.delta_truncation.lo << ',' << spec.prior.delta_truncation.hi;
  const std::string s = os.str();
  return hex(fnv1a(s.data(), s.size()));
}

std::string resolve_cache(const OracleOptions& options) {
  if (!options.cache_path.empty()) {
    return options.cache_path;
  }
  const char* env = std::getenv("NONLOCAL_UQ_CACHE");
  return env ? std::string(env) : std::string();
}

std::optional<OracleResult> cache_lookup(const std::string& path, const std::string& key) {
  if (path.empty()) {
    return std::nullopt;
  }
  std::ifstream in(path);
  if (!in) {
    return std::nullopt;
  }
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.contains(key)) {
    return std::nullopt;
  }
  const json& e = doc[key];
  OracleResult r;
  r.value = e.at("value").get<double>();
  r.nodes_per_dim = e.at("nodes_per_dim").get<int>();
  r.level = e.at("level").get<int>();
  r.converged = e.at("converged").get<bool>();
  r.refined_value = e.at("refined_value").get<double>();
  r.normalizer = e.at("normalizer").get<double>();
  r.solves = e.at("solves").get<long long>();
  return r;
}

void cache_store(const std::string& path, const std::string& key, const OracleResult& r) {
  if (path.empty()) {
    return;
  }
  json doc = json::object();
  {
    std::ifstream in(path);
    if (in) {
      json old = json::parse(in, nullptr, false);
      if (!old.is_discarded() && old.is_object()) {
        doc = std::move(old);
      }
    }
  }
  doc[key] = {{"value", r.value},          {"nodes_per_dim", r.nodes_per_dim}, {"level", r.level},
              {"converged", r.converged},  {"refined_value", r.refined_value}, {"normalizer", r.normalizer},
              {"solves", r.solves}};
  std::ofstream out(path);
  out << doc.dump(2) << '\n';
}

struct GridNode {
  KernelParams params;
  double weight = 0.0;
  double qoi = 0.0;
  Eigen::VectorXd obs;
};

struct GridShape {
  int n = 16;
  int panels = 1;
  int per_panel = 4;
};

// Tensor grid over (theta, exponent, delta). For every (exponent, delta)
// pair one affine assembly serves all theta nodes.
std::vector<GridNode> tensor_grid(int level, const GridShape& shape, bool solve_nodes, const ModelSpec& spec,
                                  int threads) {
  const auto tr = theta_rule(shape.n, spec.prior);
  const auto ar = shape.panels == 1 ? exponent_rule(1, shape.n, spec.prior)
                                    : exponent_rule(shape.panels, shape.per_panel, spec.prior);
  const auto dr = delta_rule(level, shape.panels, shape.per_panel, spec.prior, spec.k);
  const Eigen::Index nt = tr.size();
  const std::size_t pairs = static_cast<std::size_t>(ar.size() * dr.size());
  auto blocks = parallel_map(
      pairs,
      [&](std::size_t idx) {
        const Eigen::Index ia = static_cast<Eigen::Index>(idx) / dr.size();
        const Eigen::Index id = static_cast<Eigen::Index>(idx) % dr.size();
        std::vector<GridNode> out(static_cast<std::size_t>(nt));
        std::optional<AffineSystem> affine;
        if (solve_nodes) {
          affine = assemble_affine(ar.nodes(ia), dr.nodes(id), level, spec);
        }
        for (Eigen::Index it = 0; it < nt; ++it) {
          GridNode& g = out[static_cast<std::size_t>(it)];
          g.params = {tr.nodes(it), ar.nodes(ia), dr.nodes(id)};
          g.weight = tr.weights(it) * ar.weights(ia) * dr.weights(id);
          if (solve_nodes) {
            const SolutionField sol = solve(affine->at(tr.nodes(it)), spec);
            g.qoi = evaluate(sol, spec.qoi_location);
            g.obs = observe(sol, spec.obs_locations);
          }
        }
        return out;
      },
      threads);
  std::vector<GridNode> grid;
  grid.reserve(pairs * static_cast<std::size_t>(nt));
  for (auto& b : blocks) {
    for (auto& g : b) {
      grid.push_back(std::move(g));
    }
  }
  return grid;
}

GridShape shape_for(int n, int default_panels, const OracleOptions& options) {
  GridShape g;
  g.n = n;
  g.panels = options.panels > 0 ? options.panels : default_panels;
  g.per_panel = options.nodes_per_panel > 0 ? options.nodes_per_panel : std::max(2, n / 4);
  return g;
}

constexpr int kPriorPanels = 1;
constexpr int kPosteriorPanels = 32;

OracleResult prior_once(int level, int n, const Integrand& f, const OracleOptions& options, const ModelSpec& spec,
                        int threads) {
  const auto grid = tensor_grid(level, shape_for(n, kPriorPanels, options), f.needs_solve, spec, threads);
  OracleResult r;
  r.level = level;
  r.nodes_per_dim = n;
  for (const auto& g : grid) {
    r.value += g.weight * f.fn(g.params, g.qoi);
  }
  r.solves = f.needs_solve ? static_cast<long long>(grid.size()) : 0;
  return r;
}

OracleResult posterior_once(int level, const Observations& data, int n, const Integrand& f,
                            const OracleOptions& options, const ModelSpec& spec, int threads) {
  const auto grid = tensor_grid(level, shape_for(n, kPosteriorPanels, options), true, spec, threads);
  std::vector<double> log_l(grid.size());
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    log_l[i] = -phi(grid[i].obs, data);
    max_log = std::max(max_log, log_l[i]);
  }
  if (!std::isfinite(max_log)) {
    throw DegenerateEnsemble("posterior quadrature: every likelihood value is zero");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = grid[i].weight * std::exp(log_l[i] - max_log);
    num += w * f.fn(grid[i].params, grid[i].qoi);
    den += w;
  }
  if (!(den > 0)) {
    std::ostringstream os;
    os << "posterior quadrature: normalizer underflow (log max likelihood " << max_log << ")";
    throw DegenerateEnsemble(os.str());
  }
  OracleResult r;
  r.level = level;
  r.nodes_per_dim = n;
  r.value = num / den;
  r.normalizer = den * std::exp(max_log);
  r.solves = static_cast<long long>(grid.size());
  return r;
}

void check_nodes(int n, const Integrand& f) {
  if (n < 8 && f.needs_solve) {
    throw ConfigError("oracle needs at least 8 nodes per dimension");
  }
  if (n < 1) {
    throw ConfigError("oracle needs a positive node count");
  }
}

template <typename Once>
OracleResult with_convergence(int n, const OracleOptions& options, Once once) {
  OracleResult r = once(n);
  if (options.check_convergence) {
    const OracleResult fine = once(2 * n);
    r.refined_value = fine.value;
    r.solves += fine.solves;
    const double scale = std::max(std::abs(fine.value), 1e-300);
    r.converged = std::abs(fine.value - r.value) <= options.tolerance * scale;
  }
  return r;
}

}  // namespace

Observations gen_data(int level_ref, const DataSpec& data_spec, Stream& rng, const ModelSpec& spec) {
  if (level_ref < data_spec.sampler_max_level + 2) {
    std::ostringstream os;
    os << "data level " << level_ref << " must be at least the sampler max level + 2 = "
       << data_spec.sampler_max_level + 2;
    throw ConfigError(os.str());
  }
  if (!(data_spec.sigma2 > 0)) {
    throw ConfigError("sigma2 must be positive");
  }
  ModelSpec s = spec;
  s.obs_locations = data_spec.locations;
  const ForwardResult r = forward(data_spec.truth, level_ref, s);
  Observations out;
  out.locations = data_spec.locations;
  out.sigma2 = data_spec.sigma2;
  out.y = r.obs;
  if (!data_spec.noiseless) {
    std::normal_distribution<double> normal;
    const double sd = std::sqrt(data_spec.sigma2);
    for (Eigen::Index m = 0; m < out.y.size(); ++m) {
      out.y(m) += sd * normal(rng);
    }
  }
  return out;
}

RateFit fit_rates(const std::vector<int>& levels, const std::vector<double>& mean,
                  const std::vector<double>& second_moment) {
  if (levels.size() < 3) {
    throw ConfigError("rate fit needs at least 3 levels");
  }
  if (mean.size() != levels.size() || second_moment.size() != levels.size()) {
    throw ConfigError("rate fit inputs differ in length");
  }
  const auto n = static_cast<Eigen::Index>(levels.size());
  Eigen::VectorXd x(n);
  Eigen::VectorXd yb(n);
  Eigen::VectorXd yv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i) = levels[static_cast<std::size_t>(i)];
    yb(i) = std::log2(std::abs(mean[static_cast<std::size_t>(i)]));
    yv(i) = std::log2(second_moment[static_cast<std::size_t>(i)]);
  }
  const LineFit fb = fit_line(x, yb);
  const LineFit fv = fit_line(x, yv);
  RateFit r;
  r.alpha_hat = -fb.slope;
  r.beta_hat = -fv.slope;
  r.levels = levels;
  r.mean = mean;
  r.second_moment = second_moment;
  r.bias_residuals = fb.residuals;
  r.variance_residuals = fv.residuals;
  return r;
}

RateFit estimate_rates(int first, int last, int n_samples, const Stream& rng, const ModelSpec& spec,
                       int threads) {
  if (first < 1 || last - first < 2) {
    throw ConfigError("rate estimation needs levels first >= 1 and at least 3 levels");
  }
  if (n_samples < 2) {
    throw ConfigError("rate estimation needs at least 2 samples");
  }
  const int span = last - first + 1;
  const auto increments = parallel_map(
      static_cast<std::size_t>(n_samples),
      [&](std::size_t i) {
        Stream r = rng.split(i);
        const KernelParams p = prior_sample(r, spec.prior);
        std::vector<double> q(static_cast<std::size_t>(span + 1));
        for (int l = first - 1; l <= last; ++l) {
          q[static_cast<std::size_t>(l - first + 1)] = forward(p, l, spec).qoi;
        }
        std::vector<double> d(static_cast<std::size_t>(span));
        for (int j = 0; j < span; ++j) {
          d[static_cast<std::size_t>(j)] = q[static_cast<std::size_t>(j + 1)] - q[static_cast<std::size_t>(j)];
        }
        return d;
      },
      threads);
  std::vector<int> levels;
  std::vector<double> mean(static_cast<std::size_t>(span), 0.0);
  std::vector<double> second(static_cast<std::size_t>(span), 0.0);
  for (int j = 0; j < span; ++j) {
    levels.push_back(first + j);
    for (const auto& d : increments) {
      mean[static_cast<std::size_t>(j)] += d[static_cast<std::size_t>(j)];
      second[static_cast<std::size_t>(j)] += d[static_cast<std::size_t>(j)] * d[static_cast<std::size_t>(j)];
    }
    mean[static_cast<std::size_t>(j)] /= n_samples;
    second[static_cast<std::size_t>(j)] /= n_samples;
  }
  RateFit fit = fit_rates(levels, mean, second);
  fit.n_samples = n_samples;
  return fit;
}

Integrand Integrand::qoi() {
  return {"qoi", [](const KernelParams&, double q) { return q; }, true};
}
Integrand Integrand::one() {
  return {"one", [](const KernelParams&, double) { return 1.0; }, false};
}
Integrand Integrand::theta() {
  return {"theta", [](const KernelParams& p, double) { return p.theta; }, false};
}
Integrand Integrand::theta_squared() {
  return {"theta2", [](const KernelParams& p, double) { return p.theta * p.theta; }, false};
}

QuadratureRule<double> theta_rule(int n, const PriorSpec& prior) {
  auto r = mapped(gauss_legendre<double>(n), prior.theta_range.lo, prior.theta_range.hi);
  r.weights /= prior.theta_range.width();
  return r;
}

namespace {

std::vector<double> uniform_breaks(double lo, double hi, int panels) {
  std::vector<double> b;
  for (int i = 0; i <= panels; ++i) {
    b.push_back(lo + (hi - lo) * i / panels);
  }
  return b;
}

// Composite Gauss-Legendre over consecutive breaks, weights times density(x).
template <typename Density>
QuadratureRule<double> composite(const std::vector<double>& breaks, int per_panel, Density density) {
  const auto ref = gauss_legendre<double>(per_panel);
  const auto panels = static_cast<Eigen::Index>(breaks.size() - 1);
  QuadratureRule<double> r;
  r.nodes.resize(panels * ref.size());
  r.weights.resize(panels * ref.size());
  for (Eigen::Index p = 0; p < panels; ++p) {
    const auto m = mapped(ref, breaks[static_cast<std::size_t>(p)], breaks[static_cast<std::size_t>(p + 1)]);
    for (Eigen::Index i = 0; i < ref.size(); ++i) {
      r.nodes(p * ref.size() + i) = m.nodes(i);
      r.weights(p * ref.size() + i) = m.weights(i) * density(m.nodes(i));
    }
  }
  return r;
}

}  // namespace

QuadratureRule<double> exponent_rule(int panels, int nodes_per_panel, const PriorSpec& prior) {
  const auto [a, b] = prior.exponent_beta;
  const double log_norm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  return composite(uniform_breaks(0.0, 1.0, panels), nodes_per_panel, [&](double x) {
    return std::exp(log_norm + (a - 1) * std::log(x) + (b - 1) * std::log1p(-x));
  });
}

QuadratureRule<double> delta_rule(int level, int panels, int nodes_per_panel, const PriorSpec& prior, int k) {
  const double lo = prior.delta_truncation.lo;
  const double hi = prior.delta_truncation.hi;
  const double h = std::ldexp(1.0, -(k + level));
  std::vector<double> kinks{lo};
  for (double b = (std::floor(lo / h) + 1) * h; b < hi; b += h) {
    if (b > lo) {
      kinks.push_back(b);
    }
  }
  kinks.push_back(hi);
  const double max_width = 1.0 / std::max(1, panels);
  std::vector<double> breaks{lo};
  for (std::size_t i = 1; i < kinks.size(); ++i) {
    const double w = kinks[i] - kinks[i - 1];
    const int split = panels > 1 ? std::max(1, static_cast<int>(std::ceil(w / max_width - 1e-9))) : 1;
    for (int s = 1; s <= split; ++s) {
      breaks.push_back(s == split ? kinks[i] : kinks[i - 1] + w * s / split);
    }
  }
  const double rate = prior.delta_rate;
  const double mass = std::exp(-rate * lo) - std::exp(-rate * hi);
  return composite(breaks, nodes_per_panel, [&](double x) { return rate * std::exp(-rate * x) / mass; });
}

OracleResult prior_quadrature(int level, int nodes_per_dim, const Integrand& integrand, const OracleOptions& options,
                              const ModelSpec& spec, int threads) {
  check_nodes(nodes_per_dim, integrand);
  const std::string path = resolve_cache(options);
  std::ostringstream key;
  key << "prior;level=" << level << ";nodes=" << nodes_per_dim << ";panels=" << options.panels
      << ";per_panel=" << options.nodes_per_panel << ";check=" << options.check_convergence
      << ";integrand=" << integrand.name << ";spec=" << spec_key(spec);
  if (auto hit = cache_lookup(path, key.str())) {
    return *hit;
  }
  const OracleResult r = with_convergence(
      nodes_per_dim, options, [&](int n) { return prior_once(level, n, integrand, options, spec, threads); });
  cache_store(path, key.str(), r);
  return r;
}

OracleResult posterior_quadrature(int level, const Observations& data, int nodes_per_dim, const Integrand& integrand,
                                  const OracleOptions& options, const ModelSpec& spec, int threads) {
  check_nodes(nodes_per_dim, Integrand::qoi());
  data.validate();
  ModelSpec s = spec;
  s.obs_locations = data.locations;
  const std::string path = resolve_cache(options);
  std::ostringstream key;
  key << "posterior;level=" << level << ";nodes=" << nodes_per_dim << ";panels=" << options.panels
      << ";per_panel=" << options.nodes_per_panel << ";check=" << options.check_convergence
      << ";integrand=" << integrand.name << ";data=" << data_hash(data)
      << ";spec=" << spec_key(s);
  if (auto hit = cache_lookup(path, key.str())) {
    return *hit;
  }
  const OracleResult r = with_convergence(nodes_per_dim, options, [&](int n) {
    return posterior_once(level, data, n, integrand, options, s, threads);
  });
  cache_store(path, key.str(), r);
  return r;
}

std::string data_hash(const Observations& data) {
  std::uint64_t h = fnv1a(data.y.data(), sizeof(double) * static_cast<std::size_t>(data.y.size()));
  h = fnv1a(data.locations.data(), sizeof(double) * data.locations.size(), h);
  h = fnv1a(&data.sigma2, sizeof(double), h);
  return hex(h);
}

ZetaFit measure_zeta(int first, int last, int n_solves, const Stream& rng, const ModelSpec& spec) {
  if (last - first < 2) {
    throw ConfigError("cost measurement needs at least 3 levels");
  }
  if (n_solves < 1) {
    throw ConfigError("cost measurement needs at least one solve per level");
  }
  ZetaFit fit;
  Eigen::VectorXd x(last - first + 1);
  Eigen::VectorXd wall(x.size());
  Eigen::VectorXd modeled(x.size());
  for (int l = first; l <= last; ++l) {
    std::vector<KernelParams> params;
    Stream r = rng.split(static_cast<std::uint64_t>(l));
    for (int i = 0; i < n_solves; ++i) {
      params.push_back(prior_sample(r, spec.prior));
    }
    double sink = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& p : params) {
      sink += forward(p, l, spec).qoi;
    }
    const double sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / n_solves;
    if (!std::isfinite(sink)) {
      throw CoercivityLoss("cost measurement produced a non-finite solution");
    }
    const Eigen::Index i = l - first;
    x(i) = spec.k + l;  // -log2 h
    wall(i) = std::log2(sec);
    modeled(i) = std::log2(modeled_cost(l, spec));
    fit.levels.push_back(l);
    fit.seconds.push_back(sec);
  }
  fit.zeta_wall = fit_line(x, wall).slope;
  fit.zeta_modeled = fit_line(x, modeled).slope;
  return fit;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ConfigError("log-log slope needs at least two matching points");
  }
  Eigen::VectorXd lx(static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd ly(lx.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
      throw ConfigError("log-log slope needs positive values");
    }
    lx(static_cast<Eigen::Index>(i)) = std::log(x[i]);
    ly(static_cast<Eigen::Index>(i)) = std::log(y[i]);
  }
  return fit_line(lx, ly).slope;
}

}  // namespace nluq
