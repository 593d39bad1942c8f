#include "scbm/model/config.hpp"

#include <set>

#include <nlohmann/json.hpp>

#include "scbm/error.hpp"
#include "../json_util.hpp"

namespace scbm {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Global:
      return "global";
    case Variant::Amortized:
      return "amortized";
    case Variant::HardCbm:
      return "hard-cbm";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "global") return Variant::Global;
  if (s == "amortized") return Variant::Amortized;
  if (s == "hard-cbm") return Variant::HardCbm;
  throw ConfigError("unknown variant '" + s + "' (expected global, amortized or hard-cbm)");
}

std::string to_string(GlobalInit g) { return g == GlobalInit::Empirical ? "empirical" : "identity"; }

GlobalInit parse_global_init(const std::string& s) {
  if (s == "empirical") return GlobalInit::Empirical;
  if (s == "identity") return GlobalInit::Identity;
  throw ConfigError("unknown global init '" + s + "' (expected empirical or identity)");
}

std::string to_string(ProbMode m) { return m == ProbMode::McMean ? "mc-mean" : "mean-logit"; }

ProbMode parse_prob_mode(const std::string& s) {
  if (s == "mc-mean") return ProbMode::McMean;
  if (s == "mean-logit") return ProbMode::MeanLogit;
  throw ConfigError("unknown probability mode '" + s + "' (expected mc-mean or mean-logit)");
}

std::string to_string(gauss::PenaltyKind k) { return k == gauss::PenaltyKind::Signed ? "signed" : "absolute"; }

gauss::PenaltyKind parse_penalty_kind(const std::string& s) {
  if (s == "signed") return gauss::PenaltyKind::Signed;
  if (s == "absolute") return gauss::PenaltyKind::Absolute;
  throw ConfigError("unknown penalty kind '" + s + "' (expected signed or absolute)");
}

double TrainConfig::lambda2_for(Variant v) const {
  if (v == Variant::HardCbm) return 0.0;
  if (lambda2) return *lambda2;
  return v == Variant::Amortized ? 1.0 : 0.0;
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (mc_samples < 1) throw ConfigError("train: M (mc_samples) must be >= 1");
  if (!(lambda1 >= 0.0)) throw ConfigError("train: lambda1 must be >= 0");
  if (lambda2 && !(*lambda2 >= 0.0)) throw ConfigError("train: lambda2 must be >= 0");
  if (!(temperature > 0.0)) throw ConfigError("train: Gumbel temperature must be > 0");
  if (arch.hidden_width < 1 || arch.hidden_layers < 0) throw ConfigError("train: invalid backbone shape");
  if (!(arch.dropout >= 0.0 && arch.dropout < 1.0)) throw ConfigError("train: dropout must lie in [0, 1)");
  if (arch.num_classes < 2) throw ConfigError("train: num_classes must be >= 2");
}

using json_util::read;
using json_util::reject_unknown;

void to_json(nlohmann::json& j, const ArchConfig& a) {
  j = {{"hidden_width", a.hidden_width},
       {"hidden_layers", a.hidden_layers},
       {"batch_norm", a.batch_norm},
       {"dropout", a.dropout},
       {"num_classes", a.num_classes}};
}

void from_json(const nlohmann::json& j, ArchConfig& a) {
  reject_unknown(j, {"hidden_width", "hidden_layers", "batch_norm", "dropout", "num_classes"}, "arch");
  read(j, "hidden_width", a.hidden_width);
  read(j, "hidden_layers", a.hidden_layers);
  read(j, "batch_norm", a.batch_norm);
  read(j, "dropout", a.dropout);
  read(j, "num_classes", a.num_classes);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"mc_samples", c.mc_samples},
       {"lambda1", c.lambda1},
       {"temperature", c.temperature},
       {"seed", c.seed},
       {"global_init", to_string(c.global_init)},
       {"penalty", to_string(c.penalty)},
       {"prob_mode", to_string(c.prob_mode)},
       {"arch", c.arch}};
  j["lambda2"] = c.lambda2 ? nlohmann::json(*c.lambda2) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  reject_unknown(j,
                 {"epochs", "batch_size", "learning_rate", "mc_samples", "lambda1", "lambda2", "temperature", "seed",
                  "global_init", "penalty", "prob_mode", "arch"},
                 "train");
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "learning_rate", c.learning_rate);
  read(j, "mc_samples", c.mc_samples);
  read(j, "lambda1", c.lambda1);
  if (j.contains("lambda2")) {
    if (j.at("lambda2").is_null())
      c.lambda2.reset();
    else
      c.lambda2 = j.at("lambda2").get<double>();
  }
  read(j, "temperature", c.temperature);
  read(j, "seed", c.seed);
  if (j.contains("global_init")) c.global_init = parse_global_init(j.at("global_init").get<std::string>());
  if (j.contains("penalty")) c.penalty = parse_penalty_kind(j.at("penalty").get<std::string>());
  if (j.contains("prob_mode")) c.prob_mode = parse_prob_mode(j.at("prob_mode").get<std::string>());
  if (j.contains("arch")) from_json(j.at("arch"), c.arch);
}

}  // namespace scbm
