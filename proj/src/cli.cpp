#include "nluq/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "nluq/config.hpp"
#include "nluq/errors.hpp"
#include "nluq/experiments.hpp"
#include "nluq/mlmc.hpp"
#include "nluq/mlsmc.hpp"
#include "nluq/parallel.hpp"

#ifndef NLUQ_GIT_DESCRIBE
#define NLUQ_GIT_DESCRIBE "unknown"
#endif

namespace nluq {

namespace {

using nlohmann::ordered_json;

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Files are collected in memory and only written once the subcommand has
// finished, so a failed run leaves no partial artifacts behind.
class Outputs {
 public:
  void add(const std::string& name, std::string content) { files_.emplace_back(name, std::move(content)); }

  void write(const std::string& dir, std::ostream& out) const {
    std::filesystem::create_directories(dir);
    for (const auto& [name, content] : files_) {
      const auto path = std::filesystem::path(dir) / name;
      std::ofstream f(path, std::ios::binary);
      if (!f) {
        throw ConfigError("cannot write '" + path.string() + "'");
      }
      f << content;
      out << "wrote " << path.string() << "\n";
    }
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

struct Context {
  RunConfig config;
  std::string version;
  int threads = 0;
  Outputs outputs;

  Stream stream(StreamTag tag) const { return subcommand_stream(config.seed, tag); }

  ordered_json header() const { return {{"version", version}, {"seed", config.seed}}; }

  std::string csv_header(const std::string& columns) const {
    return "# nluq " + version + " seed=" + std::to_string(config.seed) + "\n" + columns + "\n";
  }

  void add_json(const std::string& name, const ordered_json& j) { outputs.add(name, j.dump(2) + "\n"); }
};

ordered_json params_json(const KernelParams& p) {
  return {{"theta", p.theta}, {"exponent", p.exponent}, {"delta", p.delta}};
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

ordered_json data_json(const Observations& d) {
  return {{"y", to_vector(d.y)}, {"locations", d.locations}, {"sigma2", d.sigma2}, {"hash", data_hash(d)}};
}

Observations load_data(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read data file '" + path + "'");
  }
  Observations d;
  try {
    const auto j = nlohmann::json::parse(in);
    const auto y = j.at("y").get<std::vector<double>>();
    d.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    d.locations = j.at("locations").get<std::vector<double>>();
    d.sigma2 = j.at("sigma2").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed data file '" + path + "': " + e.what());
  }
  d.validate();
  return d;
}

Observations obtain_data(const Context& ctx, const std::string& path) {
  if (!path.empty()) {
    return load_data(path);
  }
  Stream r = ctx.stream(StreamTag::kGenData);
  return gen_data(ctx.config.data_level(), ctx.config.data_spec(), r, ctx.config.spec);
}

// ---- subcommands -----------------------------------------------------------

struct SolveArgs {
  int level = 0;
  double theta = 1.5;
  double alpha = 0.5;
  double delta = 0.5;
  int points = 4;
  bool dump_matrix = false;
};

void cmd_solve(Context& ctx, const SolveArgs& a, std::ostream& out) {
  const ModelSpec& spec = ctx.config.spec;
  if (a.level < 0 || a.points < 1) {
    throw ConfigError("solve needs level >= 0 and points >= 1");
  }
  if (a.dump_matrix && a.level > 2) {
    throw ConfigError("matrix dump is limited to levels <= 2");
  }
  const KernelParams p{a.theta, a.alpha, a.delta};
  const AssembledSystem sys = assemble(p, a.level, spec);
  const SolutionField sol = solve(sys, spec);

  const int n = sys.space.mesh.n_elements * a.points;
  std::string csv = ctx.csv_header("x,u");
  for (int i = 0; i <= n; ++i) {
    const double x = static_cast<double>(i) / n;
    csv += num(x) + "," + num(evaluate(sol, x)) + "\n";
  }
  ctx.outputs.add("solve.csv", std::move(csv));

  const double q = evaluate(sol, spec.qoi_location);
  ordered_json j = ctx.header();
  j["level"] = a.level;
  j["h"] = sys.space.mesh.h;
  j["params"] = params_json(p);
  j["dofs"] = sys.space.dof_count();
  j["bandwidth"] = sys.bandwidth();
  j["qoi_location"] = spec.qoi_location;
  j["qoi"] = q;
  j["obs_locations"] = spec.obs_locations;
  j["obs"] = to_vector(observe(sol, spec.obs_locations));
  j["cost"] = sol.cost;
  ctx.add_json("solve.json", j);

  if (a.dump_matrix) {
    const Eigen::MatrixXd dense = sys.matrix.to_dense();
    std::string m = ctx.csv_header("# dense stiffness matrix, one row per line");
    for (Eigen::Index r = 0; r < dense.rows(); ++r) {
      for (Eigen::Index c = 0; c < dense.cols(); ++c) {
        m += (c ? "," : "") + num(dense(r, c));
      }
      m += "\n";
    }
    ctx.outputs.add("matrix.csv", std::move(m));
  }
  out << "u(" << spec.qoi_location << ") = " << num(q) << "\n";
}

struct RatesArgs {
  int first = 1;
  int last = 5;
  int samples = 500;
  int zeta_solves = 0;
};

void cmd_rates(Context& ctx, const RatesArgs& a, std::ostream& out) {
  const ModelSpec& spec = ctx.config.spec;
  const Stream rng = ctx.stream(StreamTag::kRates);
  const RateFit fit = estimate_rates(a.first, a.last, a.samples, rng.split(0), spec, ctx.threads);

  std::vector<double> h;
  std::vector<double> c;
  for (int l : fit.levels) {
    h.push_back(std::ldexp(1.0, -(spec.k + l)));
    c.push_back(modeled_cost(l, spec));
  }
  const double zeta_modeled = -loglog_slope(h, c);

  ordered_json j = ctx.header();
  j["levels"] = fit.levels;
  j["n_samples"] = fit.n_samples;
  j["alpha_hat"] = fit.alpha_hat;
  j["beta_hat"] = fit.beta_hat;
  j["zeta_modeled"] = zeta_modeled;
  j["mean"] = fit.mean;
  j["second_moment"] = fit.second_moment;
  ctx.add_json("rates.json", j);

  std::string csv = ctx.csv_header("level,mean,second_moment");
  for (std::size_t i = 0; i < fit.levels.size(); ++i) {
    csv += std::to_string(fit.levels[i]) + "," + num(fit.mean[i]) + "," + num(fit.second_moment[i]) + "\n";
  }
  ctx.outputs.add("rates.csv", std::move(csv));

  out << "alpha_hat = " << num(fit.alpha_hat) << "\nbeta_hat = " << num(fit.beta_hat)
      << "\nzeta_modeled = " << num(zeta_modeled) << "\n";
  if (a.zeta_solves > 0) {
    // wall-clock timings are not reproducible, so they never reach a file
    const ZetaFit z = measure_zeta(a.first, a.last, a.zeta_solves, rng.split(1), spec);
    out << "zeta_wall = " << num(z.zeta_wall) << "\n";
    for (std::size_t i = 0; i < z.levels.size(); ++i) {
      out << "  level " << z.levels[i] << ": " << num(z.seconds[i]) << " s/solve\n";
    }
  }
}

void cmd_gen_data(Context& ctx, std::ostream& out) {
  const Observations d = obtain_data(ctx, "");
  ordered_json j = ctx.header();
  j["level_ref"] = ctx.config.data_level();
  j["truth"] = params_json(ctx.config.data.truth);
  j["noiseless"] = ctx.config.data.noiseless;
  const ordered_json dj = data_json(d);
  for (const auto& [k, v] : dj.items()) {
    j[k] = v;
  }
  ctx.add_json("data.json", j);
  out << "y =";
  for (Eigen::Index i = 0; i < d.y.size(); ++i) {
    out << " " << num(d.y(i));
  }
  out << "\n";
}

struct OracleArgs {
  std::string kind = "prior";
  int level = 2;
  int nodes = -1;
  std::string integrand = "qoi";
  bool check = false;
  std::string data;
};

Integrand integrand_by_name(const std::string& name) {
  if (name == "qoi") return Integrand::qoi();
  if (name == "one") return Integrand::one();
  if (name == "theta") return Integrand::theta();
  if (name == "theta_squared") return Integrand::theta_squared();
  throw ConfigError("unknown integrand '" + name + "'");
}

void cmd_oracle(Context& ctx, const OracleArgs& a, std::ostream& out) {
  const int nodes = a.nodes > 0 ? a.nodes : ctx.config.oracle.nodes;
  OracleOptions opt = ctx.config.oracle_options();
  opt.check_convergence = a.check;
  const Integrand f = integrand_by_name(a.integrand);
  ordered_json j = ctx.header();
  OracleResult r;
  if (a.kind == "prior") {
    r = prior_quadrature(a.level, nodes, f, opt, ctx.config.spec, ctx.threads);
  } else if (a.kind == "posterior") {
    const Observations d = obtain_data(ctx, a.data);
    r = posterior_quadrature(a.level, d, nodes, f, opt, ctx.config.spec, ctx.threads);
    j["data"] = data_json(d);
  } else {
    throw ConfigError("oracle kind must be 'prior' or 'posterior'");
  }
  j["kind"] = a.kind;
  j["integrand"] = f.name;
  j["level"] = r.level;
  j["nodes_per_dim"] = r.nodes_per_dim;
  j["value"] = r.value;
  j["normalizer"] = r.normalizer;
  j["checked"] = a.check;
  if (a.check) {
    j["refined_value"] = r.refined_value;
    j["converged"] = r.converged;
  }
  j["solves"] = r.solves;
  ctx.add_json("oracle.json", j);
  out << a.kind << " E[" << f.name << "] at level " << r.level << " = " << num(r.value) << "\n";
}

void cmd_mlmc(Context& ctx, double eps, std::ostream& out) {
  const RunConfig& c = ctx.config;
  const Stream rng = ctx.stream(StreamTag::kMlmc);
  const IncrementStats pil = pilot(c.mlmc.pilot_max_level, c.mlmc.pilot_size, rng.split(0), c.spec, ctx.threads);
  const LevelSchedule schedule = allocate_mlmc(eps, c.mlmc.rates, pil, c.mlmc_options(), c.spec);
  const EstimateReport rep = run_mlmc(schedule, rng.split(1), c.spec, ctx.threads);

  ordered_json j = ctx.header();
  j["eps"] = eps;
  j["L"] = schedule.L;
  j["counts"] = schedule.counts;
  j["value"] = rep.value;
  j["standard_error"] = rep.standard_error();
  j["total_cost"] = rep.total_cost;
  ctx.add_json("mlmc.json", j);

  std::string csv = ctx.csv_header("level,N,mean,var,cost");
  for (int l = 0; l < rep.stats.levels(); ++l) {
    const auto i = static_cast<std::size_t>(l);
    csv += std::to_string(l) + "," + std::to_string(rep.stats.n[i]) + "," + num(rep.stats.mean[i]) + "," +
           num(rep.stats.variance[i]) + "," + num(rep.stats.cost[i]) + "\n";
  }
  ctx.outputs.add("mlmc_levels.csv", std::move(csv));
  out << "E[Q] ~ " << num(rep.value) << " +- " << num(rep.standard_error()) << " (L = " << schedule.L
      << ", cost " << num(rep.total_cost) << ")\n";
}

void cmd_mlsmc(Context& ctx, double eps, const std::string& data_path, std::ostream& out) {
  const RunConfig& c = ctx.config;
  const Observations data = obtain_data(ctx, data_path);
  const MlsmcOptions opt = c.mlsmc_options();
  const Stream rng = ctx.stream(StreamTag::kMlsmc);
  const MlsmcReport pil =
      run_pilot_mlsmc(c.mlsmc.pilot_max_level, c.mlsmc.pilot_size, data, opt, rng.split(0), c.spec, ctx.threads);
  const LevelSchedule schedule = plan_mlsmc(eps, c.mlsmc.rates, pil, opt, c.spec.k);
  const MlsmcReport rep = run_mlsmc(schedule, data, opt, rng.split(1), c.spec, ctx.threads);

  ordered_json j = ctx.header();
  j["eps"] = eps;
  j["L"] = schedule.L;
  j["counts"] = schedule.counts;
  j["value"] = rep.estimate.value;
  j["bootstrap_se"] = rep.bootstrap_se;
  j["total_cost"] = rep.estimate.total_cost;
  j["log_normalizer_ratio"] = rep.log_normalizer_ratio;
  j["data"] = data_json(data);
  ctx.add_json("mlsmc.json", j);

  std::string csv = ctx.csv_header("level,N,ESS,acceptance,min_log_weight,max_log_weight,increment");
  for (const auto& d : rep.levels) {
    csv += std::to_string(d.level) + "," + std::to_string(d.n) + "," + num(d.ess) + "," + num(d.acceptance) + "," +
           num(d.min_log_weight) + "," + num(d.max_log_weight) + "," + num(d.term) + "\n";
  }
  ctx.outputs.add("mlsmc_levels.csv", std::move(csv));
  out << "E[Q | y] ~ " << num(rep.estimate.value) << " +- " << num(rep.bootstrap_se) << " (L = " << schedule.L
      << ", cost " << num(rep.estimate.total_cost) << ")\n";
}

std::string study_csv(const Context& ctx, const std::vector<StudyRow>& rows) {
  std::string csv = ctx.csv_header("eps,mean_cost,mse");
  for (const auto& r : rows) {
    csv += num(r.eps) + "," + num(r.mean_cost) + "," + num(r.mse) + "\n";
  }
  return csv;
}

ordered_json study_summary(const std::vector<StudyRow>& rows, double reference, int reference_level) {
  std::vector<double> eps;
  std::vector<double> cost;
  ordered_json table = ordered_json::array();
  for (const auto& r : rows) {
    eps.push_back(r.eps);
    cost.push_back(r.mean_cost);
    table.push_back({{"eps", r.eps}, {"L", r.L}, {"mean_cost", r.mean_cost}, {"mse", r.mse},
                     {"mean_value", r.mean_value}, {"mse_over_eps2", r.mse / (r.eps * r.eps)}});
  }
  ordered_json j;
  j["slope"] = rows.size() >= 2 ? loglog_slope(eps, cost) : std::nan("");
  j["reference"] = reference;
  j["reference_level"] = reference_level;
  j["rows"] = table;
  return j;
}

void cmd_study(Context& ctx, const std::string& which, const std::string& data_path, std::ostream& out) {
  const RunConfig& c = ctx.config;
  const bool do_mlmc = which == "mlmc" || which == "both";
  const bool do_mlsmc = which == "mlsmc" || which == "both";
  if (!do_mlmc && !do_mlsmc) {
    throw ConfigError("study must be 'mlmc', 'mlsmc' or 'both'");
  }
  const Stream rng = ctx.stream(StreamTag::kStudy);
  OracleOptions opt = c.oracle_options();
  ordered_json summary = ctx.header();

  if (do_mlmc) {
    const IncrementStats pil = pilot(c.mlmc.pilot_max_level, c.mlmc.pilot_size, rng.split(0), c.spec, ctx.threads);
    int L_max = 0;
    for (double e : c.mlmc.eps) {
      L_max = std::max(L_max, allocate_mlmc(e, c.mlmc.rates, pil, c.mlmc_options(), c.spec).L);
    }
    const int ref_level = L_max + 2;
    const double ref =
        prior_quadrature(ref_level, c.oracle.reference_nodes, Integrand::qoi(), opt, c.spec, ctx.threads).value;
    const auto rows = mse_study(c.mlmc.eps, c.mlmc.repeats, ref, pil, c.mlmc.rates, rng.split(1),
                                c.mlmc_options(), c.spec, ctx.threads);
    ctx.outputs.add("mlmc_cost_mse.csv", study_csv(ctx, rows));
    summary["mlmc"] = study_summary(rows, ref, ref_level);
    out << "mlmc slope = " << num(summary["mlmc"]["slope"].get<double>()) << "\n";
  }
  if (do_mlsmc) {
    const Observations data = obtain_data(ctx, data_path);
    const MlsmcOptions mopt = c.mlsmc_options();
    const MlsmcReport pil =
        run_pilot_mlsmc(c.mlsmc.pilot_max_level, c.mlsmc.pilot_size, data, mopt, rng.split(2), c.spec, ctx.threads);
    int L_max = 0;
    for (double e : c.mlsmc.eps) {
      L_max = std::max(L_max, plan_mlsmc(e, c.mlsmc.rates, pil, mopt, c.spec.k).L);
    }
    const int ref_level = L_max + 2;
    const double ref = posterior_quadrature(ref_level, data, c.oracle.reference_nodes, Integrand::qoi(), opt,
                                            c.spec, ctx.threads)
                           .value;
    const auto rows = mlsmc_mse_study(c.mlsmc.eps, c.mlsmc.repeats, ref, pil, c.mlsmc.rates, data, rng.split(3),
                                      mopt, c.spec, ctx.threads);
    ctx.outputs.add("mlsmc_cost_mse.csv", study_csv(ctx, rows));
    summary["mlsmc"] = study_summary(rows, ref, ref_level);
    summary["mlsmc"]["data"] = data_json(data);
    out << "mlsmc slope = " << num(summary["mlsmc"]["slope"].get<double>()) << "\n";
  }
  ctx.add_json("study_slopes.json", summary);
}

}  // namespace

std::string version_string() { return NLUQ_GIT_DESCRIBE; }

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multilevel Monte Carlo and multilevel SMC for a nonlocal diffusion model", "nluq"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int threads = 0;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "master seed (overrides the config)");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--threads", threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);

  SolveArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "solve the forward problem at one parameter");
  solve_cmd->add_option("--level", solve_args.level, "mesh level");
  solve_cmd->add_option("--theta", solve_args.theta, "coefficient theta");
  solve_cmd->add_option("--alpha", solve_args.alpha, "kernel exponent");
  solve_cmd->add_option("--delta", solve_args.delta, "horizon");
  solve_cmd->add_option("--points", solve_args.points, "output points per element");
  solve_cmd->add_flag("--dump-matrix", solve_args.dump_matrix, "write the dense stiffness matrix (levels <= 2)");

  RatesArgs rates_args;
  auto* rates_cmd = app.add_subcommand("rates", "estimate the bias and variance rates");
  rates_cmd->add_option("--first", rates_args.first, "first increment level");
  rates_cmd->add_option("--last", rates_args.last, "last increment level");
  rates_cmd->add_option("--samples", rates_args.samples, "coupled prior samples");
  rates_cmd->add_option("--zeta-solves", rates_args.zeta_solves, "timed solves per level for wall-clock zeta");

  auto* gen_cmd = app.add_subcommand("gen-data", "generate synthetic observations");

  OracleArgs oracle_args;
  auto* oracle_cmd = app.add_subcommand("oracle", "tensor quadrature reference values");
  oracle_cmd->add_option("--kind", oracle_args.kind, "prior or posterior");
  oracle_cmd->add_option("--level", oracle_args.level, "mesh level");
  oracle_cmd->add_option("--nodes", oracle_args.nodes, "nodes per dimension (default from config)");
  oracle_cmd->add_option("--integrand", oracle_args.integrand, "qoi, one, theta or theta_squared");
  oracle_cmd->add_flag("--check", oracle_args.check, "also evaluate with twice the nodes");
  oracle_cmd->add_option("--data", oracle_args.data, "observations file from gen-data");

  double mlmc_eps = 0.015625;
  auto* mlmc_cmd = app.add_subcommand("mlmc", "multilevel Monte Carlo for the prior mean of Q");
  mlmc_cmd->add_option("--eps", mlmc_eps, "target root mean square error");

  double mlsmc_eps = 0.015625;
  std::string mlsmc_data;
  auto* mlsmc_cmd = app.add_subcommand("mlsmc", "multilevel SMC for the posterior mean of Q");
  mlsmc_cmd->add_option("--eps", mlsmc_eps, "target root mean square error");
  mlsmc_cmd->add_option("--data", mlsmc_data, "observations file from gen-data");

  std::string study_which = "both";
  std::string study_data;
  auto* study_cmd = app.add_subcommand("study", "cost versus MSE tables");
  study_cmd->add_option("--which", study_which, "mlmc, mlsmc or both");
  study_cmd->add_option("--data", study_data, "observations file from gen-data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    Context ctx;
    ctx.version = version_string();
    ctx.config = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) ctx.config.seed = *seed;
    if (!out_dir.empty()) ctx.config.output_dir = out_dir;
    ctx.config.validate();
    ctx.threads = threads;
    set_default_threads(threads);

    std::string name;
    if (solve_cmd->parsed()) {
      name = "solve";
      cmd_solve(ctx, solve_args, out);
    } else if (rates_cmd->parsed()) {
      name = "rates";
      cmd_rates(ctx, rates_args, out);
    } else if (gen_cmd->parsed()) {
      name = "gen-data";
      cmd_gen_data(ctx, out);
    } else if (oracle_cmd->parsed()) {
      name = "oracle";
      cmd_oracle(ctx, oracle_args, out);
    } else if (mlmc_cmd->parsed()) {
      name = "mlmc";
      cmd_mlmc(ctx, mlmc_eps, out);
    } else if (mlsmc_cmd->parsed()) {
      name = "mlsmc";
      cmd_mlsmc(ctx, mlsmc_eps, mlsmc_data, out);
    } else if (study_cmd->parsed()) {
      name = "study";
      cmd_study(ctx, study_which, study_data, out);
    }
    ctx.outputs.add(name + ".config.json", dump_config(ctx.config, ctx.version));
    ctx.outputs.write(ctx.config.output_dir, out);
  } catch (const ConfigError& e) {
    err << "nluq: configuration error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "nluq: numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "nluq: error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace nluq
