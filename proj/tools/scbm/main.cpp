#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "scbm/error.hpp"
#include "scbm/experiment/csv.hpp"
#include "scbm/experiment/experiment.hpp"
#include "scbm/intervention/intervention.hpp"
#include "scbm/model/checkpoint_io.hpp"
#include "scbm/model/loss.hpp"
#include "scbm/model/predict.hpp"
#include "scbm/model/train.hpp"
#include "scbm/serve/http.hpp"
#include "scbm/synth/dataset_io.hpp"
#include "scbm/synth/generator.hpp"

namespace {

using namespace scbm;
using json = nlohmann::json;
namespace ex = scbm::experiment;

int exit_code_for(const std::string& kind) {
  if (kind == "usage" || kind == "config") return 2;
  if (kind == "io" || kind == "checksum" || kind == "version") return 3;
  if (kind == "training") return 4;
  return 1;
}

int report_error(const std::string& kind, const std::string& message) {
  std::cerr << "error: " << json{{"kind", kind}, {"message", message}}.dump() << "\n";
  return exit_code_for(kind);
}

std::vector<Index> split_rows(const synth::Dataset& ds, const std::string& split) {
  const auto rows = ds.rows(synth::parse_split(split));
  if (rows.empty()) throw UsageError("the " + split + " split of the dataset is empty");
  return rows;
}

void check_shapes(const Checkpoint& ck, const synth::Dataset& ds) {
  if (ds.num_features() != ck.model.num_features() || ds.num_concepts() != ck.model.num_concepts())
    throw ConfigError("dataset shape (p=" + std::to_string(ds.num_features()) + ", C=" +
                      std::to_string(ds.num_concepts()) + ") does not match the checkpoint (p=" +
                      std::to_string(ck.model.num_features()) + ", C=" + std::to_string(ck.model.num_concepts()) +
                      ")");
}

TrainConfig load_train_config(const std::string& path) {
  if (path.empty()) return TrainConfig{};
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path + "'");
  json j = json::parse(f, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config '" + path + "' is not valid JSON");
  // Either a bare train config or an experiment config with a "train" section.
  if (j.is_object() && j.contains("train") && j.at("train").is_object()) j = j.at("train");
  try {
    return j.get<TrainConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

serve::HttpServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic concept bottleneck models: data, training, evaluation, interventions and serving"};
  app.require_subcommand(1);

  // generate-data
  auto* gen = app.add_subcommand("generate-data", "Write a synthetic dataset with correlated concepts");
  std::string gen_preset = "desk";
  std::optional<Index> gen_n, gen_p, gen_c, gen_rank;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--preset", gen_preset, "Size preset")->check(CLI::IsMember({"paper", "desk"}));
  gen->add_option("--n", gen_n, "Samples (overrides the preset)");
  gen->add_option("--p", gen_p, "Covariates (overrides the preset)");
  gen->add_option("--c", gen_c, "Concepts (overrides the preset)");
  gen->add_option("--rank", gen_rank, "Columns of the covariance factor W");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--out", gen_out, "Output dataset file")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
  std::string tr_variant = "global", tr_config, tr_data, tr_out;
  std::optional<int> tr_epochs, tr_mc;
  std::optional<std::uint64_t> tr_seed;
  std::optional<double> tr_lambda2, tr_lr;
  std::optional<std::string> tr_global_init, tr_prob_mode, tr_penalty;
  tr->add_option("--variant", tr_variant, "Model variant")->check(CLI::IsMember({"global", "amortized", "hard-cbm"}));
  tr->add_option("--config", tr_config, "Train config JSON (bare or with a \"train\" section)");
  tr->add_option("--data", tr_data, "Dataset file")->required();
  tr->add_option("--out", tr_out, "Checkpoint file")->required();
  tr->add_option("--epochs", tr_epochs);
  tr->add_option("--mc-samples", tr_mc, "M, Monte Carlo samples per instance");
  tr->add_option("--seed", tr_seed);
  tr->add_option("--lambda2", tr_lambda2, "Precision penalty weight");
  tr->add_option("--learning-rate", tr_lr);
  tr->add_option("--global-init", tr_global_init)->check(CLI::IsMember({"empirical", "identity"}));
  tr->add_option("--prob-mode", tr_prob_mode)->check(CLI::IsMember({"mc-mean", "mean-logit"}));
  tr->add_option("--penalty", tr_penalty)->check(CLI::IsMember({"signed", "absolute"}));

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Metrics of a checkpoint on a dataset split");
  std::string ev_ckpt, ev_data, ev_split = "test", ev_out, ev_preds;
  int ev_mc = 100;
  std::uint64_t ev_seed = 0;
  ev->add_option("--ckpt", ev_ckpt)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--split", ev_split)->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("--mc-samples", ev_mc);
  ev->add_option("--seed", ev_seed, "Prediction stream seed");
  ev->add_option("--out", ev_out, "Metrics CSV");
  ev->add_option("--predictions", ev_preds, "Per-row probabilities CSV");

  // intervene
  auto* iv = app.add_subcommand("intervene", "Oracle intervention curve on a dataset split");
  std::string iv_ckpt, iv_data, iv_policy = "uncertainty", iv_strategy = "confidence-region", iv_out,
                              iv_split = "test";
  double iv_level = 0.99;
  int iv_max_k = 5, iv_mc = 100;
  std::uint64_t iv_seed = 0;
  iv->add_option("--ckpt", iv_ckpt)->required();
  iv->add_option("--data", iv_data)->required();
  iv->add_option("--policy", iv_policy)->check(CLI::IsMember({"random", "uncertainty"}));
  iv->add_option("--strategy", iv_strategy)->check(CLI::IsMember({"percentile", "confidence-region"}));
  iv->add_option("--level", iv_level, "Confidence level of the region");
  iv->add_option("--max-k", iv_max_k);
  iv->add_option("--mc-samples", iv_mc);
  iv->add_option("--seed", iv_seed);
  iv->add_option("--split", iv_split)->check(CLI::IsMember({"train", "val", "test"}));
  iv->add_option("--out", iv_out, "Curve CSV")->required();

  // export-corr
  auto* ec = app.add_subcommand("export-corr", "Write the learned concept correlation matrix as CSV");
  std::string ec_ckpt, ec_out, ec_data;
  std::optional<Index> ec_row;
  ec->add_option("--ckpt", ec_ckpt)->required();
  ec->add_option("--out", ec_out)->required();
  ec->add_option("--data", ec_data, "Dataset (amortized models)");
  ec->add_option("--row", ec_row, "Dataset row to evaluate an amortized model at");

  // serve
  auto* sv = app.add_subcommand("serve", "HTTP session API over a checkpoint");
  std::string sv_ckpt, sv_data, sv_host = "127.0.0.1", sv_policy = "uncertainty", sv_strategy = "confidence-region",
                              sv_snapshot;
  int sv_port = 8080, sv_mc = 100;
  double sv_level = 0.99;
  std::uint64_t sv_seed = 0;
  sv->add_option("--ckpt", sv_ckpt)->required();
  sv->add_option("--data", sv_data, "Dataset for test-index sessions");
  sv->add_option("--host", sv_host);
  sv->add_option("--port", sv_port);
  sv->add_option("--seed", sv_seed);
  sv->add_option("--mc-samples", sv_mc);
  sv->add_option("--policy", sv_policy)->check(CLI::IsMember({"random", "uncertainty"}));
  sv->add_option("--strategy", sv_strategy)->check(CLI::IsMember({"percentile", "confidence-region"}));
  sv->add_option("--level", sv_level);
  sv->add_option("--snapshot", sv_snapshot, "Session snapshot file: restored at start, written on shutdown");

  // run-experiment
  auto* rx = app.add_subcommand("run-experiment", "Seeds x variants: train, evaluate, curves, aggregates");
  std::string rx_config, rx_out_dir;
  bool rx_parallel = false;
  rx->add_option("--config", rx_config, "Experiment config JSON")->required();
  rx->add_option("--out-dir", rx_out_dir, "Overrides output_dir");
  rx->add_flag("--parallel-seeds", rx_parallel, "Run seeds concurrently");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what());
  }

  try {
    if (*gen) {
      synth::SynthConfig sc = synth::SynthConfig::preset(gen_preset, gen_seed);
      if (gen_n) sc.n = *gen_n;
      if (gen_p) sc.p = *gen_p;
      if (gen_c) sc.c = *gen_c;
      if (gen_rank) sc.rank = *gen_rank;
      const synth::Dataset ds = synth::generate(sc);
      synth::save(ds, gen_out);
      std::cout << json{{"out", gen_out}, {"n", ds.size()}, {"p", ds.num_features()}, {"c", ds.num_concepts()},
                        {"seed", gen_seed}}
                       .dump()
                << "\n";
    } else if (*tr) {
      TrainConfig cfg = load_train_config(tr_config);
      if (tr_epochs) cfg.epochs = *tr_epochs;
      if (tr_mc) cfg.mc_samples = *tr_mc;
      if (tr_seed) cfg.seed = *tr_seed;
      if (tr_lambda2) cfg.lambda2 = *tr_lambda2;
      if (tr_lr) cfg.learning_rate = *tr_lr;
      if (tr_global_init) cfg.global_init = parse_global_init(*tr_global_init);
      if (tr_prob_mode) cfg.prob_mode = parse_prob_mode(*tr_prob_mode);
      if (tr_penalty) cfg.penalty = parse_penalty_kind(*tr_penalty);
      const synth::Dataset ds = synth::load(tr_data);
      const Checkpoint ck = train(ds, parse_variant(tr_variant), cfg, [](const EpochRecord& r) {
        std::fprintf(stderr, "epoch %d loss %.5f concept_nll %.5f val_target_acc %.4f val_concept_acc %.4f\n", r.epoch,
                     r.train_loss, r.train_concept_nll, r.val_target_accuracy, r.val_concept_accuracy);
      });
      save_checkpoint(ck, tr_out);
      std::cout << json{{"out", tr_out}, {"best_epoch", ck.best_epoch}, {"checkpoint_hash", checkpoint_hash(ck)}}.dump()
                << "\n";
    } else if (*ev) {
      const Checkpoint ck = load_checkpoint(ev_ckpt);
      const synth::Dataset ds = synth::load(ev_data);
      check_shapes(ck, ds);
      const auto rows = split_rows(ds, ev_split);
      const Batch b = make_batch(ds, rows);
      const PredictOptions opts{ev_mc, ck.config.temperature, ck.config.prob_mode};
      const auto preds = predict(ck.model, b.x, rows, opts, ev_seed);
      const auto report = metrics::report(concept_prob_matrix(preds), b.concepts, target_prob_matrix(preds), b.labels);
      const std::string hash = checkpoint_hash(ck);
      if (!ev_out.empty())
        ex::write_text(ev_out, ex::metrics_csv(ex::csv_comment("metrics", hash, std::to_string(ev_seed)), report));
      if (!ev_preds.empty()) {
        std::string text = ex::csv_comment("predictions", hash, std::to_string(ev_seed)) + "row";
        for (Index i = 0; i < ck.model.num_concepts(); ++i) text += ",concept_" + std::to_string(i);
        for (Index k = 0; k < ck.model.num_classes(); ++k) text += ",class_" + std::to_string(k);
        text += "\n";
        for (std::size_t r = 0; r < rows.size(); ++r) {
          text += std::to_string(rows[r]);
          for (Index i = 0; i < preds[r].concept_probs.size(); ++i) text += "," + ex::format_exact(preds[r].concept_probs(i));
          for (Index k = 0; k < preds[r].target_probs.size(); ++k) text += "," + ex::format_exact(preds[r].target_probs(k));
          text += "\n";
        }
        ex::write_text(ev_preds, text);
      }
      std::cout << json{{"split", ev_split},
                        {"rows", rows.size()},
                        {"target_accuracy", report.target_accuracy},
                        {"concept_accuracy", report.concept_accuracy},
                        {"jaccard", report.jaccard},
                        {"brier", report.brier},
                        {"ece", report.ece}}
                       .dump()
                << "\n";
    } else if (*iv) {
      const Checkpoint ck = load_checkpoint(iv_ckpt);
      const synth::Dataset ds = synth::load(iv_data);
      check_shapes(ck, ds);
      const auto rows = split_rows(ds, iv_split);
      const Batch b = make_batch(ds, rows);
      intervention::StrategyConfig sc;
      sc.kind = intervention::parse_strategy(iv_strategy);
      sc.level = iv_level;
      const PredictOptions opts{iv_mc, ck.config.temperature, ck.config.prob_mode};
      const auto curve = intervention::run_intervention_curve(ck.model, ck.percentiles, b.x, b.concepts, b.labels,
                                                              rows, intervention::parse_policy(iv_policy), sc,
                                                              iv_max_k, opts, iv_seed);
      if (curve.clipped)
        std::fprintf(stderr, "warning: max-k %d exceeds the %ld concepts; clipped\n", iv_max_k,
                     static_cast<long>(ck.model.num_concepts()));
      if (curve.solver_warnings > 0)
        std::fprintf(stderr, "warning: %d confidence-region solves hit the iteration budget\n", curve.solver_warnings);
      ex::write_text(iv_out, ex::curve_csv(ex::csv_comment("curve", checkpoint_hash(ck), std::to_string(iv_seed)), curve));
      std::cout << json{{"out", iv_out}, {"points", curve.points.size()}, {"clipped", curve.clipped},
                        {"solver_warnings", curve.solver_warnings}}
                       .dump()
                << "\n";
    } else if (*ec) {
      const Checkpoint ck = load_checkpoint(ec_ckpt);
      std::optional<RowVector> x;
      std::string seed = "none";
      if (ck.model.variant() == Variant::Amortized) {
        if (ec_data.empty() || !ec_row) throw UsageError("amortized checkpoint: pass --data and --row");
        const synth::Dataset ds = synth::load(ec_data);
        check_shapes(ck, ds);
        if (*ec_row < 0 || *ec_row >= ds.size()) throw NotFoundError("row " + std::to_string(*ec_row) + " out of range");
        x = ds.x.row(*ec_row);
        seed = "row" + std::to_string(*ec_row);
      }
      ex::write_text(ec_out, ex::matrix_csv(ex::csv_comment("correlation", checkpoint_hash(ck), seed),
                                            ex::export_correlation(ck, x)));
      std::cout << json{{"out", ec_out}}.dump() << "\n";
    } else if (*sv) {
      Checkpoint ck = load_checkpoint(sv_ckpt);
      std::optional<synth::Dataset> ds;
      if (!sv_data.empty()) ds = synth::load(sv_data);
      serve::ServiceOptions opts;
      opts.seed = sv_seed;
      opts.mc_samples = sv_mc;
      opts.policy = intervention::parse_policy(sv_policy);
      opts.strategy.kind = intervention::parse_strategy(sv_strategy);
      opts.strategy.level = sv_level;
      serve::Service service(std::move(ck), std::move(ds), opts);
      if (!sv_snapshot.empty() && std::filesystem::exists(sv_snapshot)) {
        std::ifstream f(sv_snapshot);
        service.restore(json::parse(f));
      }
      serve::HttpServer server(service);
      const int port = server.bind(sv_host, sv_port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << json{{"listening", sv_host + ":" + std::to_string(port)},
                        {"checkpoint_hash", service.checkpoint_hash()}}
                       .dump()
                << std::endl;
      server.listen();
      g_server = nullptr;
      if (!sv_snapshot.empty()) ex::write_text(sv_snapshot, service.snapshot().dump(2) + "\n");
    } else if (*rx) {
      ex::ExperimentConfig cfg = ex::load_config(rx_config, ex::process_env());
      if (!rx_out_dir.empty()) cfg.output_dir = rx_out_dir;
      if (rx_parallel) cfg.parallel_seeds = true;
      const auto result = ex::run_experiment(cfg);
      std::cout << json{{"dir", result.dir}, {"status", result.ok ? "ok" : "failed"},
                        {"config_hash", result.manifest.at("config_hash")}}
                       .dump()
                << "\n";
      if (!result.ok) return report_error("stage", "one or more stages failed; see " + result.dir + "/manifest.json");
    }
  } catch (const Error& e) {
    return report_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
  return 0;
}
