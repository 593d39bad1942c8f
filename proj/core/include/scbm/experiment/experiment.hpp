#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scbm/intervention/intervention.hpp"
#include "scbm/metrics/metrics.hpp"
#include "scbm/model/config.hpp"
#include "scbm/model/train.hpp"
#include "scbm/synth/dataset.hpp"

namespace scbm::experiment {

/// Dataset file, or a synthetic preset generated once per seed. Explicit
/// n/p/c override the preset's sizes.
struct DataSource {
  std::optional<std::string> file;
  std::string preset = "desk";
  std::optional<Index> n;
  std::optional<Index> p;
  std::optional<Index> c;
};

struct ExperimentConfig {
  DataSource data;
  std::vector<Variant> variants = {Variant::Global};
  TrainConfig train;
  intervention::StrategyConfig strategy;
  std::vector<intervention::PolicyKind> policies = {intervention::PolicyKind::Uncertainty};
  std::vector<intervention::StrategyKind> strategies = {intervention::StrategyKind::ConfidenceRegion};
  int max_k = 5;
  std::vector<std::uint64_t> seeds = {0};
  int eval_mc_samples = 100;
  std::string output_dir = "runs";
  bool parallel_seeds = false;
  bool timestamped = true;

  /// Throws ConfigError on empty lists, a missing data file or invalid nested configs.
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Unknown keys are rejected. `num_seeds: n` is shorthand for seeds 0..n-1.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// SCBM_<KEY> replaces top-level key <key> (upper-cased). The value is parsed
/// as JSON when it parses, otherwise taken as a string.
void apply_env_overrides(nlohmann::json& j, const EnvLookup& env);
EnvLookup process_env();

/// Reads a JSON config file and applies environment overrides.
ExperimentConfig load_config(const std::string& path, const EnvLookup& env);

/// 8 hex digits identifying the config (output location excluded).
std::string config_hash(const ExperimentConfig& c);

/// Loads the file or generates the preset for `seed`.
synth::Dataset load_data(const DataSource& src, std::uint64_t seed);

/// corr(Sigma) for the shared factor, or at `x` for amortized models.
Matrix export_correlation(const Checkpoint& ck, const std::optional<RowVector>& x = std::nullopt);

/// Test-split predictions with instance streams keyed by row index.
metrics::MetricReport evaluate(const Checkpoint& ck, const synth::Dataset& ds, const std::vector<Index>& rows,
                               int mc_samples, std::uint64_t seed);

struct RunResult {
  std::string dir;
  nlohmann::json manifest;
  bool ok = true;  // no stage failed
};

/// Per seed and variant: data, train, evaluate, curves, correlation; then
/// mean/std aggregates across seeds. Stage errors are recorded in the manifest
/// and the remaining seeds still run. See docs/formats.md for the file set.
RunResult run_experiment(const ExperimentConfig& cfg);

}  // namespace scbm::experiment
