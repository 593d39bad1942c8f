#include "scbm/experiment/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>

#include "../json_util.hpp"
#include "scbm/binary_io.hpp"
#include "scbm/error.hpp"
#include "scbm/experiment/csv.hpp"
#include "scbm/gauss/gaussian.hpp"
#include "scbm/model/checkpoint_io.hpp"
#include "scbm/model/loss.hpp"
#include "scbm/model/predict.hpp"
#include "scbm/synth/dataset_io.hpp"
#include "scbm/synth/generator.hpp"

namespace scbm::experiment {

namespace fs = std::filesystem;
using intervention::PolicyKind;
using intervention::StrategyKind;
using json = nlohmann::json;

namespace {

const std::vector<std::string> kTopLevelKeys = {"data",       "variants", "train",           "strategy",
                                                "policies",   "strategies", "max_k",         "seeds",
                                                "num_seeds",  "eval_mc_samples", "output_dir", "parallel_seeds",
                                                "timestamped"};

template <typename T, typename Parse>
std::vector<T> parse_list(const json& j, const char* key, Parse parse) {
  if (!j.is_array()) throw ConfigError(std::string("config key '") + key + "': expected a list");
  std::vector<T> out;
  for (const auto& item : j) out.push_back(parse(item.get<std::string>()));
  return out;
}

std::string curve_name(PolicyKind p, StrategyKind s) {
  return "curve_" + intervention::to_string(p) + "_" + intervention::to_string(s) + ".csv";
}

std::string timestamp_dir_name() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "run-%Y%m%d-%H%M%S", &tm);
  return buf;
}

fs::path make_run_dir(const ExperimentConfig& cfg) {
  fs::path base(cfg.output_dir);
  fs::create_directories(base);
  if (!cfg.timestamped) return base;
  const std::string stem = timestamp_dir_name();
  fs::path dir = base / stem;
  for (int k = 1; fs::exists(dir); ++k) dir = base / (stem + "-" + std::to_string(k));
  fs::create_directories(dir);
  return dir;
}

json error_entry(const std::string& stage, const std::string& variant, const std::string& kind,
                 const std::string& message) {
  return {{"stage", stage}, {"variant", variant}, {"kind", kind}, {"message", message}};
}

struct SeedResult {
  std::map<Variant, metrics::MetricReport> reports;
  std::map<std::pair<Variant, std::string>, intervention::InterventionCurve> curves;
  json errors = json::array();
  std::vector<std::string> files;
};

// Runs `fn`, recording a library or standard exception as a stage error.
template <typename Fn>
bool stage(SeedResult& out, const std::string& name, const std::string& variant, Fn&& fn) {
  try {
    fn();
    return true;
  } catch (const Error& e) {
    out.errors.push_back(error_entry(name, variant, e.kind(), e.what()));
  } catch (const std::exception& e) {
    out.errors.push_back(error_entry(name, variant, "internal", e.what()));
  }
  return false;
}

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const fs::path& run_dir,
                    const std::string& hash) {
  SeedResult out;
  const fs::path seed_dir = run_dir / ("seed-" + std::to_string(seed));
  const std::string seed_str = std::to_string(seed);
  auto rel = [&](const fs::path& p) { return fs::relative(p, run_dir).generic_string(); };

  synth::Dataset ds;
  if (!stage(out, "data", "", [&] { ds = load_data(cfg.data, seed); })) return out;
  const auto test_rows = ds.rows(synth::Split::Test);

  for (Variant v : cfg.variants) {
    const std::string vname = to_string(v);
    const fs::path dir = seed_dir / vname;
    fs::create_directories(dir);
    TrainConfig tc = cfg.train;
    tc.seed = seed;

    Checkpoint ck;
    if (!stage(out, "train", vname, [&] {
          ck = train(ds, v, tc);
          save_checkpoint(ck, (dir / "model.ckpt").string());
          out.files.push_back(rel(dir / "model.ckpt"));
        }))
      continue;

    stage(out, "evaluate", vname, [&] {
      const auto report = evaluate(ck, ds, test_rows, cfg.eval_mc_samples, seed);
      write_text((dir / "metrics.csv").string(), metrics_csv(csv_comment("metrics", hash, seed_str), report));
      out.reports[v] = report;
      out.files.push_back(rel(dir / "metrics.csv"));
    });

    const Batch test = make_batch(ds, test_rows);
    const PredictOptions opts{cfg.eval_mc_samples, tc.temperature, tc.prob_mode};
    for (PolicyKind p : cfg.policies)
      for (StrategyKind s : cfg.strategies) {
        const std::string name = curve_name(p, s);
        stage(out, "curve", vname, [&] {
          intervention::StrategyConfig sc = cfg.strategy;
          sc.kind = s;
          const auto curve = intervention::run_intervention_curve(ck.model, ck.percentiles, test.x, test.concepts,
                                                                  test.labels, test_rows, p, sc, cfg.max_k, opts, seed);
          write_text((dir / name).string(), curve_csv(csv_comment("curve", hash, seed_str), curve));
          out.curves[{v, name}] = curve;
          out.files.push_back(rel(dir / name));
        });
      }

    stage(out, "correlation", vname, [&] {
      std::optional<RowVector> x;
      if (v == Variant::Amortized) {
        if (test_rows.empty()) throw UsageError("correlation: no test row to evaluate the amortized factor at");
        x = ds.x.row(test_rows.front());
      }
      write_text((dir / "corr.csv").string(), matrix_csv(csv_comment("correlation", hash, seed_str),
                                                         export_correlation(ck, x)));
      out.files.push_back(rel(dir / "corr.csv"));
    });
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (variants.empty()) throw ConfigError("experiment: at least one variant required");
  if (seeds.empty()) throw ConfigError("experiment: the seed list is empty");
  if (max_k < 0) throw ConfigError("experiment: max_k must be >= 0");
  if (eval_mc_samples < 1) throw ConfigError("experiment: eval_mc_samples must be >= 1");
  if (data.file && !fs::exists(*data.file)) throw ConfigError("experiment: data file '" + *data.file + "' not found");
  if (!data.file) synth::SynthConfig::preset(data.preset);
  train.validate();
  strategy.validate();
}

void to_json(json& j, const ExperimentConfig& c) {
  json data = json::object();
  if (c.data.file) data["file"] = *c.data.file;
  else data["preset"] = c.data.preset;
  if (c.data.n) data["n"] = *c.data.n;
  if (c.data.p) data["p"] = *c.data.p;
  if (c.data.c) data["c"] = *c.data.c;
  json variants = json::array();
  for (Variant v : c.variants) variants.push_back(to_string(v));
  json policies = json::array();
  for (PolicyKind p : c.policies) policies.push_back(intervention::to_string(p));
  json strategies = json::array();
  for (StrategyKind s : c.strategies) strategies.push_back(intervention::to_string(s));
  j = {{"data", data},
       {"variants", variants},
       {"train", c.train},
       {"strategy",
        {{"level", c.strategy.level},
         {"tolerance", c.strategy.tolerance},
         {"max_iterations", c.strategy.max_iterations}}},
       {"policies", policies},
       {"strategies", strategies},
       {"max_k", c.max_k},
       {"seeds", c.seeds},
       {"eval_mc_samples", c.eval_mc_samples},
       {"output_dir", c.output_dir},
       {"parallel_seeds", c.parallel_seeds},
       {"timestamped", c.timestamped}};
}

void from_json(const json& j, ExperimentConfig& c) {
  using json_util::read;
  json_util::reject_unknown(j, {kTopLevelKeys.begin(), kTopLevelKeys.end()}, "experiment");
  if (j.contains("data")) {
    const json& d = j.at("data");
    json_util::reject_unknown(d, {"file", "preset", "n", "p", "c"}, "data");
    if (d.contains("file")) c.data.file = d.at("file").get<std::string>();
    read(d, "preset", c.data.preset);
    if (d.contains("n")) c.data.n = d.at("n").get<Index>();
    if (d.contains("p")) c.data.p = d.at("p").get<Index>();
    if (d.contains("c")) c.data.c = d.at("c").get<Index>();
  }
  if (j.contains("variants")) c.variants = parse_list<Variant>(j.at("variants"), "variants", parse_variant);
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
  if (j.contains("strategy")) {
    const json& s = j.at("strategy");
    json_util::reject_unknown(s, {"level", "tolerance", "max_iterations"}, "strategy");
    read(s, "level", c.strategy.level);
    read(s, "tolerance", c.strategy.tolerance);
    read(s, "max_iterations", c.strategy.max_iterations);
  }
  if (j.contains("policies"))
    c.policies = parse_list<PolicyKind>(j.at("policies"), "policies", intervention::parse_policy);
  if (j.contains("strategies"))
    c.strategies = parse_list<StrategyKind>(j.at("strategies"), "strategies", intervention::parse_strategy);
  read(j, "max_k", c.max_k);
  if (j.contains("seeds") && j.contains("num_seeds")) throw ConfigError("experiment: give seeds or num_seeds, not both");
  read(j, "seeds", c.seeds);
  if (j.contains("num_seeds")) {
    const int n = j.at("num_seeds").get<int>();
    if (n < 1) throw ConfigError("experiment: num_seeds must be >= 1");
    c.seeds.clear();
    for (int s = 0; s < n; ++s) c.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  read(j, "eval_mc_samples", c.eval_mc_samples);
  read(j, "output_dir", c.output_dir);
  read(j, "parallel_seeds", c.parallel_seeds);
  read(j, "timestamped", c.timestamped);
}

void apply_env_overrides(json& j, const EnvLookup& env) {
  for (const auto& key : kTopLevelKeys) {
    std::string name = "SCBM_";
    for (char ch : key) name += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    const auto value = env(name);
    if (!value) continue;
    json parsed = json::parse(*value, nullptr, false);
    j[key] = parsed.is_discarded() ? json(*value) : parsed;
    if (key == "seeds") j.erase("num_seeds");
    if (key == "num_seeds") j.erase("seeds");
  }
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

ExperimentConfig load_config(const std::string& path, const EnvLookup& env) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path + "'");
  json j = json::parse(f, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config '" + path + "' is not valid JSON");
  apply_env_overrides(j, env);
  ExperimentConfig c;
  try {
    c = j.get<ExperimentConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

std::string config_hash(const ExperimentConfig& c) {
  json j = c;
  j.erase("output_dir");
  j.erase("parallel_seeds");
  j.erase("timestamped");
  const std::string text = j.dump();
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08x",
                io::crc32(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return buf;
}

synth::Dataset load_data(const DataSource& src, std::uint64_t seed) {
  if (src.file) return synth::load(*src.file);
  synth::SynthConfig sc = synth::SynthConfig::preset(src.preset, seed);
  if (src.n) sc.n = *src.n;
  if (src.p) sc.p = *src.p;
  if (src.c) sc.c = *src.c;
  return synth::generate(sc);
}

Matrix export_correlation(const Checkpoint& ck, const std::optional<RowVector>& x) {
  Matrix chol;
  if (ck.model.variant() == Variant::Amortized) {
    if (!x) throw UsageError("correlation: an amortized model needs an instance");
    chol = ck.model.concept_head_one(*x).chol;
  } else {
    chol = ck.model.shared_cholesky();
  }
  return gauss::correlation(chol * chol.transpose());
}

metrics::MetricReport evaluate(const Checkpoint& ck, const synth::Dataset& ds, const std::vector<Index>& rows,
                               int mc_samples, std::uint64_t seed) {
  if (rows.empty()) throw UsageError("evaluate: no rows to evaluate");
  const Batch b = make_batch(ds, rows);
  const PredictOptions opts{mc_samples, ck.config.temperature, ck.config.prob_mode};
  const auto preds = predict(ck.model, b.x, rows, opts, seed);
  return metrics::report(concept_prob_matrix(preds), b.concepts, target_prob_matrix(preds), b.labels);
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const std::string hash = config_hash(cfg);
  const fs::path run_dir = make_run_dir(cfg);

  std::vector<SeedResult> results(cfg.seeds.size());
  if (cfg.parallel_seeds) {
    std::vector<std::future<SeedResult>> jobs;
    for (std::uint64_t s : cfg.seeds)
      jobs.push_back(std::async(std::launch::async, run_seed, std::cref(cfg), s, std::cref(run_dir), std::cref(hash)));
    for (std::size_t i = 0; i < jobs.size(); ++i) results[i] = jobs[i].get();
  } else {
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) results[i] = run_seed(cfg, cfg.seeds[i], run_dir, hash);
  }

  RunResult out;
  out.dir = run_dir.string();
  json seeds = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    out.ok = out.ok && results[i].errors.empty();
    seeds.push_back({{"seed", cfg.seeds[i]},
                     {"status", results[i].errors.empty() ? "ok" : "failed"},
                     {"errors", results[i].errors},
                     {"files", results[i].files}});
  }

  std::string seed_list;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) seed_list += (i ? "," : "") + std::to_string(cfg.seeds[i]);
  json aggregate_files = json::array();
  json aggregate_errors = json::array();
  for (Variant v : cfg.variants) {
    const fs::path dir = run_dir / "aggregate" / to_string(v);
    try {
      std::vector<metrics::MetricReport> reports;
      for (const auto& r : results)
        if (auto it = r.reports.find(v); it != r.reports.end()) reports.push_back(it->second);
      if (!reports.empty()) {
        fs::create_directories(dir);
        write_text((dir / "metrics.csv").string(),
                   aggregate_metrics_csv(csv_comment("metrics-aggregate", hash, seed_list), reports));
        aggregate_files.push_back(fs::relative(dir / "metrics.csv", run_dir).generic_string());
      }
      for (PolicyKind p : cfg.policies)
        for (StrategyKind s : cfg.strategies) {
          const std::string name = curve_name(p, s);
          std::vector<intervention::InterventionCurve> curves;
          for (const auto& r : results)
            if (auto it = r.curves.find({v, name}); it != r.curves.end()) curves.push_back(it->second);
          if (curves.empty()) continue;
          fs::create_directories(dir);
          write_text((dir / name).string(), aggregate_curve_csv(csv_comment("curve-aggregate", hash, seed_list), curves));
          aggregate_files.push_back(fs::relative(dir / name, run_dir).generic_string());
        }
    } catch (const Error& e) {
      aggregate_errors.push_back(error_entry("aggregate", to_string(v), e.kind(), e.what()));
      out.ok = false;
    }
  }

  json config = cfg;
  out.manifest = {{"format", "scbm-run"},
                  {"version", 1},
                  {"config_hash", hash},
                  {"config", config},
                  {"seeds", seeds},
                  {"aggregate_files", aggregate_files},
                  {"aggregate_errors", aggregate_errors},
                  {"status", out.ok ? "ok" : "failed"}};
  // output_dir and timestamping do not change results; keep them out so reruns match byte for byte.
  out.manifest["config"].erase("output_dir");
  out.manifest["config"].erase("timestamped");
  out.manifest["config"].erase("parallel_seeds");
  write_text((run_dir / "manifest.json").string(), out.manifest.dump(2) + "\n");
  return out;
}

}  // namespace scbm::experiment
