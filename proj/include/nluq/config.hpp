#pragma once

// Run configuration: one JSON document, every key optional, unknown keys
// rejected. The resolved document (defaults filled in) is written next to
// every output so a run can be repeated exactly.

#include <cstdint>
#include <string>
#include <vector>

#include "nluq/experiments.hpp"
#include "nluq/mlmc.hpp"
#include "nluq/mlsmc.hpp"
#include "nluq/nonlocal_fem.hpp"

namespace nluq {

struct MlmcConfig {
  RateTriple rates;
  std::vector<double> eps{0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625};
  int pilot_size = 200;
  int pilot_max_level = 4;
  int repeats = 20;
  long long min_count = 2;
};

struct MlsmcConfig {
  RateTriple rates;
  std::vector<double> eps{0.125, 0.0625, 0.03125, 0.015625};
  long long n0_floor = 20;
  MutationConfig mutation;
  int pilot_size = 200;
  int pilot_max_level = 4;
  int bootstrap = 200;
  double min_ess = 2.0;
  int repeats = 10;
};

struct DataConfig {
  KernelParams truth{2.0, 0.5, 0.2};
  int level_ref = -1;  // -1: max_level + 2
  bool noiseless = false;
};

struct OracleConfig {
  int nodes = 16;
  int reference_nodes = 16;  // for the study reference at L_max + 2
  int panels = 0;
  int nodes_per_panel = 0;
  std::string cache;  // empty: $NONLOCAL_UQ_CACHE
};

struct RunConfig {
  ModelSpec spec;
  double sigma2 = 0.01;
  int max_level = 6;
  MlmcConfig mlmc;
  MlsmcConfig mlsmc;
  DataConfig data;
  OracleConfig oracle;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  // Throws ConfigError on inconsistent values.
  void validate() const;

  DataSpec data_spec() const;
  int data_level() const;
  MlmcOptions mlmc_options() const;
  MlsmcOptions mlsmc_options() const;
  OracleOptions oracle_options() const;
};

// Throws ConfigError on malformed JSON, wrong types or unknown keys.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Fully resolved JSON (pretty-printed, stable key order). A non-empty
// version is recorded under "version", which parse_config accepts and ignores.
std::string dump_config(const RunConfig& config, const std::string& version = "");

}  // namespace nluq
