#include "nluq/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "nluq/errors.hpp"

namespace nluq {

namespace {

using nlohmann::ordered_json;

// Reads fields out of one JSON object and remembers which keys were
// used, so anything left over can be reported as unknown.
class Block {
 public:
  Block(const ordered_json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) {
      throw ConfigError(where() + " must be an object");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      return;
    }
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(child(key) + " has the wrong type");
    }
  }

  void get(const char* key, double& out) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      return;
    }
    if (!j_.at(key).is_number()) {
      throw ConfigError(child(key) + " must be a number");
    }
    out = j_.at(key).get<double>();
  }

  void get(const char* key, int& out) { get_integer(key, out); }
  void get(const char* key, long long& out) { get_integer(key, out); }

  void get(const char* key, std::uint64_t& out) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      return;
    }
    if (!j_.at(key).is_number_unsigned()) {
      throw ConfigError(child(key) + " must be a non-negative integer");
    }
    out = j_.at(key).get<std::uint64_t>();
  }

  void get(const char* key, Interval& out) {
    std::vector<double> v{out.lo, out.hi};
    get(key, v);
    if (v.size() != 2) {
      throw ConfigError(child(key) + " must have two entries");
    }
    out = {v[0], v[1]};
  }

  void get(const char* key, std::array<double, 2>& out) {
    std::vector<double> v{out[0], out[1]};
    get(key, v);
    if (v.size() != 2) {
      throw ConfigError(child(key) + " must have two entries");
    }
    out = {v[0], v[1]};
  }

  void get(const char* key, std::vector<double>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      return;
    }
    const auto& a = j_.at(key);
    if (!a.is_array()) {
      throw ConfigError(child(key) + " must be an array of numbers");
    }
    std::vector<double> v;
    for (const auto& e : a) {
      if (!e.is_number()) {
        throw ConfigError(child(key) + " must be an array of numbers");
      }
      v.push_back(e.get<double>());
    }
    out = std::move(v);
  }

  // nullptr if absent; the caller parses the sub-block.
  const ordered_json* sub(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        throw ConfigError("unknown config key '" + (path_.empty() ? it.key() : path_ + "." + it.key()) + "'");
      }
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  template <typename I>
  void get_integer(const char* key, I& out) {
    seen_.insert(key);
    if (!j_.contains(key)) {
      return;
    }
    if (!j_.at(key).is_number_integer()) {
      throw ConfigError(child(key) + " must be an integer");
    }
    out = j_.at(key).get<I>();
  }

  const ordered_json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_rates(Block& parent, const char* key, RateTriple& r) {
  if (const auto* j = parent.sub(key)) {
    Block b(*j, parent.child(key));
    b.get("alpha", r.alpha);
    b.get("beta", r.beta);
    b.get("zeta", r.zeta);
    b.finish();
  }
}

void read_model(const ordered_json& j, RunConfig& c) {
  Block b(j, "model");
  if (const auto* p = b.sub("prior")) {
    Block pb(*p, "model.prior");
    pb.get("theta_range", c.spec.prior.theta_range);
    pb.get("exponent_beta", c.spec.prior.exponent_beta);
    pb.get("delta_shape", c.spec.prior.delta_shape);
    pb.get("delta_rate", c.spec.prior.delta_rate);
    pb.get("delta_truncation", c.spec.prior.delta_truncation);
    pb.finish();
  }
  std::string variant = to_string(c.spec.f_variant);
  b.get("f_variant", variant);
  c.spec.f_variant = parse_f_variant(variant);
  b.get("forcing", c.spec.forcing);
  b.get("obs_locations", c.spec.obs_locations);
  b.get("sigma2", c.sigma2);
  b.get("qoi_location", c.spec.qoi_location);
  b.finish();
}

void read_discretization(const ordered_json& j, RunConfig& c) {
  Block b(j, "discretization");
  b.get("k", c.spec.k);
  b.get("max_level", c.max_level);
  if (const auto* q = b.sub("quadrature")) {
    Block qb(*q, "discretization.quadrature");
    qb.get("regular", c.spec.quadrature.regular);
    qb.get("singular", c.spec.quadrature.singular);
    qb.get("inner", c.spec.quadrature.inner);
    qb.finish();
  }
  b.get("zeta", c.spec.zeta);
  std::string solver = c.spec.solver == SolverKind::kDense ? "dense" : "banded";
  b.get("solver", solver);
  if (solver == "banded") {
    c.spec.solver = SolverKind::kBanded;
  } else if (solver == "dense") {
    c.spec.solver = SolverKind::kDense;
  } else {
    throw ConfigError("discretization.solver must be 'banded' or 'dense'");
  }
  b.finish();
}

void read_mlmc(const ordered_json& j, MlmcConfig& m) {
  Block b(j, "mlmc");
  read_rates(b, "rates", m.rates);
  b.get("eps", m.eps);
  b.get("pilot_size", m.pilot_size);
  b.get("pilot_max_level", m.pilot_max_level);
  b.get("repeats", m.repeats);
  b.get("min_count", m.min_count);
  b.finish();
}

void read_mlsmc(const ordered_json& j, MlsmcConfig& m) {
  Block b(j, "mlsmc");
  read_rates(b, "rates", m.rates);
  b.get("eps", m.eps);
  b.get("n0_floor", m.n0_floor);
  if (const auto* mu = b.sub("mutation")) {
    Block mb(*mu, "mlsmc.mutation");
    mb.get("steps", m.mutation.steps);
    mb.get("init_steps", m.mutation.init_steps);
    mb.get("scale", m.mutation.scale);
    mb.get("floor", m.mutation.floor);
    mb.finish();
  }
  b.get("pilot_size", m.pilot_size);
  b.get("pilot_max_level", m.pilot_max_level);
  b.get("bootstrap", m.bootstrap);
  b.get("min_ess", m.min_ess);
  b.get("repeats", m.repeats);
  b.finish();
}

void read_data(const ordered_json& j, DataConfig& d) {
  Block b(j, "data");
  if (const auto* t = b.sub("truth")) {
    Block tb(*t, "data.truth");
    tb.get("theta", d.truth.theta);
    tb.get("exponent", d.truth.exponent);
    tb.get("delta", d.truth.delta);
    tb.finish();
  }
  b.get("level_ref", d.level_ref);
  b.get("noiseless", d.noiseless);
  b.finish();
}

void read_oracle(const ordered_json& j, OracleConfig& o) {
  Block b(j, "oracle");
  b.get("nodes", o.nodes);
  b.get("reference_nodes", o.reference_nodes);
  b.get("panels", o.panels);
  b.get("nodes_per_panel", o.nodes_per_panel);
  b.get("cache", o.cache);
  b.finish();
}

ordered_json rates_json(const RateTriple& r) {
  return {{"alpha", r.alpha}, {"beta", r.beta}, {"zeta", r.zeta}};
}

void check_eps(const std::vector<double>& eps, const char* name) {
  if (eps.empty()) {
    throw ConfigError(std::string(name) + " must not be empty");
  }
  for (double e : eps) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      throw ConfigError(std::string(name) + " entries must be positive");
    }
  }
}

}  // namespace

void RunConfig::validate() const {
  spec.prior.validate();
  if (spec.k < 1 || spec.k > 20) {
    throw ConfigError("discretization.k must be in [1, 20]");
  }
  if (max_level < 0 || max_level > 12) {
    throw ConfigError("discretization.max_level must be in [0, 12]");
  }
  if (spec.quadrature.regular < 1 || spec.quadrature.singular < 1 || spec.quadrature.inner < 1) {
    throw ConfigError("discretization.quadrature orders must be positive");
  }
  if (!(spec.zeta > 0.0)) {
    throw ConfigError("discretization.zeta must be positive");
  }
  // every admissible horizon must exceed the coarsest mesh width
  if (!(spec.prior.delta_truncation.lo >= std::ldexp(1.0, -spec.k))) {
    throw ConfigError("model.prior.delta_truncation lower end must be at least h_0 = 2^-k");
  }
  if (!(sigma2 > 0.0)) {
    throw ConfigError("model.sigma2 must be positive");
  }
  if (spec.obs_locations.empty()) {
    throw ConfigError("model.obs_locations must not be empty");
  }
  for (double x : spec.obs_locations) {
    if (!(x >= 0.0 && x <= 1.0)) {
      throw ConfigError("model.obs_locations must lie in [0, 1]");
    }
  }
  if (!(spec.qoi_location >= 0.0 && spec.qoi_location <= 1.0)) {
    throw ConfigError("model.qoi_location must lie in [0, 1]");
  }
  mlmc.rates.validate();
  mlsmc.rates.validate();
  check_eps(mlmc.eps, "mlmc.eps");
  check_eps(mlsmc.eps, "mlsmc.eps");
  if (mlmc.pilot_size < 2 || mlsmc.pilot_size < 2) {
    throw ConfigError("pilot_size must be at least 2");
  }
  if (mlmc.pilot_max_level < 2 || mlmc.pilot_max_level > max_level) {
    throw ConfigError("mlmc.pilot_max_level must be in [2, max_level]");
  }
  if (mlsmc.pilot_max_level < 2 || mlsmc.pilot_max_level > max_level) {
    throw ConfigError("mlsmc.pilot_max_level must be in [2, max_level]");
  }
  if (mlmc.repeats < 1 || mlsmc.repeats < 1) {
    throw ConfigError("repeats must be positive");
  }
  if (mlmc.min_count < 2) {
    throw ConfigError("mlmc.min_count must be at least 2");
  }
  if (mlsmc.n0_floor < 2) {
    throw ConfigError("mlsmc.n0_floor must be at least 2");
  }
  if (mlsmc.mutation.steps < 0 || mlsmc.mutation.init_steps < 0) {
    throw ConfigError("mlsmc.mutation steps must be non-negative");
  }
  if (!(mlsmc.mutation.scale > 0.0) || !(mlsmc.mutation.floor >= 0.0)) {
    throw ConfigError("mlsmc.mutation scale must be positive and floor non-negative");
  }
  if (mlsmc.bootstrap < 2) {
    throw ConfigError("mlsmc.bootstrap must be at least 2");
  }
  if (!(mlsmc.min_ess >= 1.0)) {
    throw ConfigError("mlsmc.min_ess must be at least 1");
  }
  if (data.level_ref >= 0 && data.level_ref < max_level + 2) {
    throw ConfigError("data.level_ref must be at least max_level + 2");
  }
  // closed box: the truth may sit on the edge of the prior support
  const auto box = support_box(spec.prior);
  const double t[3] = {data.truth.theta, data.truth.exponent, data.truth.delta};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(t[i] >= box[i].lo && t[i] <= box[i].hi)) {
      throw ConfigError("data.truth must lie in the closed prior support");
    }
  }
  if (oracle.nodes < 2 || oracle.reference_nodes < 2) {
    throw ConfigError("oracle node counts must be at least 2");
  }
  if (oracle.panels < 0 || oracle.nodes_per_panel < 0) {
    throw ConfigError("oracle.panels and oracle.nodes_per_panel must be non-negative");
  }
  if (output_dir.empty()) {
    throw ConfigError("output_dir must not be empty");
  }
}

int RunConfig::data_level() const { return data.level_ref >= 0 ? data.level_ref : max_level + 2; }

DataSpec RunConfig::data_spec() const {
  DataSpec d;
  d.truth = data.truth;
  d.locations = spec.obs_locations;
  d.sigma2 = sigma2;
  d.noiseless = data.noiseless;
  d.sampler_max_level = max_level;
  return d;
}

MlmcOptions RunConfig::mlmc_options() const {
  MlmcOptions o;
  o.max_level = max_level;
  o.min_count = mlmc.min_count;
  return o;
}

MlsmcOptions RunConfig::mlsmc_options() const {
  MlsmcOptions o;
  o.mutation = mlsmc.mutation;
  o.min_particles = mlsmc.n0_floor;
  o.min_ess = mlsmc.min_ess;
  o.bootstrap = mlsmc.bootstrap;
  o.max_level = max_level;
  return o;
}

OracleOptions RunConfig::oracle_options() const {
  OracleOptions o;
  o.panels = oracle.panels;
  o.nodes_per_panel = oracle.nodes_per_panel;
  // the environment wins over the config file
  const char* env = std::getenv("NONLOCAL_UQ_CACHE");
  o.cache_path = (env && *env) ? std::string(env) : oracle.cache;
  return o;
}

RunConfig parse_config(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Block root(j, "");
  if (const auto* m = root.sub("model")) read_model(*m, c);
  if (const auto* d = root.sub("discretization")) read_discretization(*d, c);
  if (const auto* m = root.sub("mlmc")) read_mlmc(*m, c.mlmc);
  if (const auto* m = root.sub("mlsmc")) read_mlsmc(*m, c.mlsmc);
  if (const auto* d = root.sub("data")) read_data(*d, c.data);
  if (const auto* o = root.sub("oracle")) read_oracle(*o, c.oracle);
  std::string version;
  root.get("version", version);
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file '" + path + "'");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& c, const std::string& version) {
  const auto& p = c.spec.prior;
  ordered_json j;
  if (!version.empty()) {
    j["version"] = version;
  }
  j["model"] = {
      {"prior",
       {{"theta_range", {p.theta_range.lo, p.theta_range.hi}},
        {"exponent_beta", {p.exponent_beta[0], p.exponent_beta[1]}},
        {"delta_shape", p.delta_shape},
        {"delta_rate", p.delta_rate},
        {"delta_truncation", {p.delta_truncation.lo, p.delta_truncation.hi}}}},
      {"f_variant", to_string(c.spec.f_variant)},
      {"forcing", c.spec.forcing},
      {"obs_locations", c.spec.obs_locations},
      {"sigma2", c.sigma2},
      {"qoi_location", c.spec.qoi_location}};
  j["discretization"] = {
      {"k", c.spec.k},
      {"max_level", c.max_level},
      {"quadrature",
       {{"regular", c.spec.quadrature.regular},
        {"singular", c.spec.quadrature.singular},
        {"inner", c.spec.quadrature.inner}}},
      {"zeta", c.spec.zeta},
      {"solver", c.spec.solver == SolverKind::kDense ? "dense" : "banded"}};
  j["mlmc"] = {{"rates", rates_json(c.mlmc.rates)},
               {"eps", c.mlmc.eps},
               {"pilot_size", c.mlmc.pilot_size},
               {"pilot_max_level", c.mlmc.pilot_max_level},
               {"repeats", c.mlmc.repeats},
               {"min_count", c.mlmc.min_count}};
  const auto& mu = c.mlsmc.mutation;
  j["mlsmc"] = {{"rates", rates_json(c.mlsmc.rates)},
                {"eps", c.mlsmc.eps},
                {"n0_floor", c.mlsmc.n0_floor},
                {"mutation",
                 {{"steps", mu.steps}, {"init_steps", mu.init_steps}, {"scale", mu.scale}, {"floor", mu.floor}}},
                {"pilot_size", c.mlsmc.pilot_size},
                {"pilot_max_level", c.mlsmc.pilot_max_level},
                {"bootstrap", c.mlsmc.bootstrap},
                {"min_ess", c.mlsmc.min_ess},
                {"repeats", c.mlsmc.repeats}};
  j["data"] = {{"truth",
                {{"theta", c.data.truth.theta},
                 {"exponent", c.data.truth.exponent},
                 {"delta", c.data.truth.delta}}},
               {"level_ref", c.data_level()},
               {"noiseless", c.data.noiseless}};
  j["oracle"] = {{"nodes", c.oracle.nodes},
                 {"reference_nodes", c.oracle.reference_nodes},
                 {"panels", c.oracle.panels},
                 {"nodes_per_panel", c.oracle.nodes_per_panel},
                 {"cache", c.oracle.cache}};
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  return j.dump(2) + "\n";
}

}  // namespace nluq
