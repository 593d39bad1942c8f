#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "scbm/gauss/gaussian.hpp"

namespace scbm {

using Index = Eigen::Index;

enum class Variant { Global, Amortized, HardCbm };

/// How the global covariance factor is initialized before training.
enum class GlobalInit { Empirical, Identity };

/// Source of the reported concept probability: MC mean of sigmoid(eta) or
/// sigmoid(mu).
enum class ProbMode { McMean, MeanLogit };

/// Forward value of the concept bottleneck during training. StraightThrough
/// passes hard {0,1} samples with the relaxed gradient; Relaxed passes the
/// relaxed sample itself (used for exact finite-difference checks).
enum class Bottleneck { StraightThrough, Relaxed };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);  // global | amortized | hard-cbm
std::string to_string(GlobalInit g);
GlobalInit parse_global_init(const std::string& s);  // empirical | identity
std::string to_string(ProbMode m);
ProbMode parse_prob_mode(const std::string& s);  // mc-mean | mean-logit
std::string to_string(gauss::PenaltyKind k);
gauss::PenaltyKind parse_penalty_kind(const std::string& s);  // signed | absolute

/// Backbone shape: `hidden_layers` ReLU layers of `hidden_width` units followed
/// by a linear output layer; g_psi is a linear map onto `num_classes` logits.
struct ArchConfig {
  Index hidden_width = 256;
  Index hidden_layers = 3;
  bool batch_norm = true;
  double dropout = 0.2;
  Index num_classes = 2;
};

struct TrainConfig {
  int epochs = 150;
  Index batch_size = 64;
  double learning_rate = 1e-4;
  int mc_samples = 100;
  double lambda1 = 1.0;
  /// Unset means the variant default: 1 for amortized, 0 for global.
  std::optional<double> lambda2;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  GlobalInit global_init = GlobalInit::Empirical;
  gauss::PenaltyKind penalty = gauss::PenaltyKind::Signed;
  ProbMode prob_mode = ProbMode::McMean;
  ArchConfig arch;

  double lambda2_for(Variant v) const;
  /// Throws ConfigError when M < 1, lambdas < 0, tau <= 0, or sizes are invalid.
  void validate() const;
};

void to_json(nlohmann::json& j, const ArchConfig& a);
void from_json(const nlohmann::json& j, ArchConfig& a);
void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace scbm
