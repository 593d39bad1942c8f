#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scbm/error.hpp"
#include "scbm/intervention/intervention.hpp"
#include "scbm/model/train.hpp"
#include "scbm/synth/dataset.hpp"

namespace scbm::serve {

using json = nlohmann::json;

/// A second request reached a session that is still handling one.
class BusyError : public Error {
 public:
  explicit BusyError(const std::string& message) : Error("busy", message) {}
};

struct ServiceOptions {
  std::uint64_t seed = 0;
  int mc_samples = 100;
  intervention::StrategyConfig strategy;
  intervention::PolicyKind policy = intervention::PolicyKind::Uncertainty;
};

/// Session API over one immutable checkpoint. Every method returns the JSON
/// payload documented in docs/api.md and throws scbm::Error subclasses
/// (not_found, conflict, usage, busy) on failure. Thread-safe; requests on one
/// session are serialized and a concurrent second request gets BusyError.
///
/// The MC stream of a session is keyed by its instance (dataset row, or a
/// checksum of raw covariates), so a session on test row r reproduces the
/// `evaluate` prediction for r and two sessions on one instance agree.
class Service {
 public:
  Service(Checkpoint ck, std::optional<synth::Dataset> data, ServiceOptions opts);

  /// Body: {"test_index": i} (i-th row of the test split), {"row": r}, or
  /// {"x": [...], "concepts": [...]?}.
  json create_session(const json& body);
  json get_session(const std::string& id);
  /// Body: {"concept": i, "value": 0|1}.
  json apply(const std::string& id, const json& body);
  json undo(const std::string& id);
  json suggestion(const std::string& id);
  /// Shared correlation, or the session instance's for amortized models.
  json correlation(const std::optional<std::string>& session_id);
  json health() const;

  /// Sessions with their action histories; restore() replays them.
  json snapshot() const;
  void restore(const json& snap);

  const std::string& checkpoint_hash() const { return hash_; }
  const Checkpoint& checkpoint() const { return ck_; }

 private:
  struct Action {
    Index concept_index = 0;
    int value = 0;
    std::string timestamp;
  };
  struct Session {
    std::string id;
    json selector;
    std::optional<Index> row;
    std::uint64_t stream_key = 0;
    RowVector x;
    std::optional<Eigen::VectorXd> truth;
    gauss::ConceptDistribution dist;
    std::vector<Action> history;
    intervention::InterventionState state;
    Eigen::VectorXd previous_probs;
    std::mutex busy;
  };

  std::shared_ptr<Session> find(const std::string& id) const;
  std::shared_ptr<Session> build_session(const std::string& id, const json& body) const;
  /// State after the first `actions` entries of the history.
  intervention::InterventionState compute(const Session& s, std::size_t actions) const;
  /// Recomputes state and the previous-step probabilities from the history.
  void replay(Session& s) const;
  std::optional<Index> next_concept(const Session& s) const;
  json payload(const Session& s) const;

  Checkpoint ck_;
  std::optional<synth::Dataset> data_;
  std::vector<Index> test_rows_;
  ServiceOptions opts_;
  std::string hash_;

  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

}  // namespace scbm::serve
