#include "scbm/serve/service.hpp"

#include <chrono>
#include <ctime>

#include "scbm/binary_io.hpp"
#include "scbm/experiment/experiment.hpp"
#include "scbm/model/checkpoint_io.hpp"
#include "scbm/model/predict.hpp"

namespace scbm::serve {
namespace {

constexpr std::uint64_t kSuggestionStream = 0x9011;
constexpr std::uint64_t kRawInstanceBit = std::uint64_t{1} << 63;

json to_array(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

std::string now_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

template <typename T>
T field(const json& body, const char* key) {
  if (!body.is_object() || !body.contains(key)) throw UsageError(std::string("request body needs '") + key + "'");
  try {
    return body.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("request field '") + key + "' has the wrong type");
  }
}

}  // namespace

Service::Service(Checkpoint ck, std::optional<synth::Dataset> data, ServiceOptions opts)
    : ck_(std::move(ck)), data_(std::move(data)), opts_(opts) {
  opts_.strategy.validate();
  if (opts_.mc_samples < 1) throw ConfigError("serve: mc_samples must be >= 1");
  if (data_) {
    if (data_->num_features() != ck_.model.num_features() || data_->num_concepts() != ck_.model.num_concepts())
      throw ConfigError("serve: dataset shape does not match the checkpoint");
    test_rows_ = data_->rows(synth::Split::Test);
  }
  hash_ = scbm::checkpoint_hash(ck_);
}

std::shared_ptr<Service::Session> Service::build_session(const std::string& id, const json& body) const {
  auto s = std::make_shared<Session>();
  s->id = id;
  const Index p = ck_.model.num_features();
  const Index c = ck_.model.num_concepts();
  if (!body.is_object()) throw UsageError("session body must be an object");
  if (body.contains("test_index") || body.contains("row")) {
    if (!data_) throw UsageError("no dataset loaded; create the session from raw covariates");
    Index row = 0;
    if (body.contains("test_index")) {
      const auto k = field<long long>(body, "test_index");
      if (k < 0 || k >= static_cast<long long>(test_rows_.size()))
        throw NotFoundError("test index " + std::to_string(k) + " out of range (test split has " +
                            std::to_string(test_rows_.size()) + " rows)");
      row = test_rows_[static_cast<std::size_t>(k)];
      s->selector = {{"test_index", k}, {"row", row}};
    } else {
      const auto r = field<long long>(body, "row");
      if (r < 0 || r >= data_->size()) throw NotFoundError("row " + std::to_string(r) + " out of range");
      row = static_cast<Index>(r);
      s->selector = {{"row", row}};
    }
    s->row = row;
    s->stream_key = static_cast<std::uint64_t>(row);
    s->x = data_->x.row(row);
    s->truth = data_->concept_row(row).transpose();
  } else if (body.contains("x")) {
    const auto x = field<std::vector<double>>(body, "x");
    if (static_cast<Index>(x.size()) != p)
      throw UsageError("x has " + std::to_string(x.size()) + " values, the model expects " + std::to_string(p));
    s->x = Eigen::Map<const RowVector>(x.data(), p);
    if (!s->x.allFinite()) throw UsageError("x must be finite");
    s->stream_key = kRawInstanceBit | io::crc32(reinterpret_cast<const std::uint8_t*>(x.data()), x.size() * sizeof(double));
    s->selector = {{"x", x}};
    if (body.contains("concepts")) {
      const auto truth = field<std::vector<int>>(body, "concepts");
      if (static_cast<Index>(truth.size()) != c) throw UsageError("concepts must have one entry per concept");
      Eigen::VectorXd t(c);
      for (Index i = 0; i < c; ++i) {
        if (truth[static_cast<std::size_t>(i)] != 0 && truth[static_cast<std::size_t>(i)] != 1)
          throw UsageError("concepts must be 0 or 1");
        t(i) = truth[static_cast<std::size_t>(i)];
      }
      s->truth = t;
      s->selector["concepts"] = truth;
    }
  } else {
    throw UsageError("session body needs test_index, row or x");
  }
  s->dist = ck_.model.concept_head_one(s->x);
  return s;
}

intervention::InterventionState Service::compute(const Session& s, std::size_t actions) const {
  std::vector<Index> set;
  std::vector<int> values;
  for (std::size_t k = 0; k < actions; ++k) {
    set.push_back(s.history[k].concept_index);
    values.push_back(s.history[k].value);
  }
  RandomStream rng = instance_stream(opts_.seed, s.stream_key);
  const PredictOptions popts{opts_.mc_samples, ck_.config.temperature, ck_.config.prob_mode};
  return intervention::apply_intervention(ck_.model, s.dist, set, values, opts_.strategy, ck_.percentiles, popts, rng);
}

void Service::replay(Session& s) const {
  const std::size_t n = s.history.size();
  s.state = compute(s, n);
  s.previous_probs = n == 0 ? s.state.concept_probs : compute(s, n - 1).concept_probs;
}

std::optional<Index> Service::next_concept(const Session& s) const {
  if (static_cast<Index>(s.history.size()) == ck_.model.num_concepts()) return std::nullopt;
  RandomStream rng = RandomStream::derive(opts_.seed, {kSuggestionStream, s.stream_key, s.history.size()});
  return intervention::policy_next(opts_.policy, s.state.concept_probs, s.state.intervened, rng);
}

json Service::payload(const Session& s) const {
  json intervened = json::array();
  for (const auto& a : s.history) intervened.push_back({{"concept", a.concept_index}, {"value", a.value}});
  const auto next = next_concept(s);
  json out = {{"session_id", s.id},
              {"checkpoint_hash", hash_},
              {"variant", to_string(ck_.model.variant())},
              {"instance", s.selector},
              {"intervened", intervened},
              {"concept_probs", to_array(s.state.concept_probs)},
              {"target_probs", to_array(s.state.target_probs)},
              {"delta", to_array(s.state.concept_probs - s.previous_probs)},
              {"mu", to_array(s.dist.mean)},
              {"sigma_diag", to_array(s.dist.covariance().diagonal())},
              {"eta_intervened", to_array(s.state.eta)},
              {"solver_warning", s.state.solver_warning},
              {"suggestion", next ? json(*next) : json(nullptr)},
              {"ground_truth", s.truth ? to_array(*s.truth) : json(nullptr)}};
  if (s.row && data_) out["label"] = data_->labels[static_cast<std::size_t>(*s.row)];
  return out;
}

std::shared_ptr<Service::Session> Service::find(const std::string& id) const {
  std::shared_lock lock(sessions_mu_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

json Service::create_session(const json& body) {
  std::string id;
  {
    std::unique_lock lock(sessions_mu_);
    id = "s" + std::to_string(next_id_++);
  }
  auto s = build_session(id, body);
  replay(*s);
  json out = payload(*s);
  std::unique_lock lock(sessions_mu_);
  sessions_[id] = s;
  return out;
}

json Service::get_session(const std::string& id) {
  auto s = find(id);
  std::unique_lock lock(s->busy, std::try_to_lock);
  if (!lock.owns_lock()) throw BusyError("session '" + id + "' is handling another request; retry");
  return payload(*s);
}

json Service::apply(const std::string& id, const json& body) {
  auto s = find(id);
  std::unique_lock lock(s->busy, std::try_to_lock);
  if (!lock.owns_lock()) throw BusyError("session '" + id + "' is handling another request; retry");
  const auto concept_index = field<long long>(body, "concept");
  const auto value = field<int>(body, "value");
  if (concept_index < 0 || concept_index >= ck_.model.num_concepts())
    throw UsageError("concept " + std::to_string(concept_index) + " out of range");
  if (value != 0 && value != 1) throw UsageError("value must be 0 or 1");
  for (const auto& a : s->history)
    if (a.concept_index == concept_index)
      throw ConflictError("concept " + std::to_string(concept_index) + " is already intervened on");

  const auto before = s->state;
  s->history.push_back({static_cast<Index>(concept_index), value, now_utc()});
  try {
    s->state = compute(*s, s->history.size());
  } catch (...) {
    s->history.pop_back();
    throw;
  }
  s->previous_probs = before.concept_probs;
  return payload(*s);
}

json Service::undo(const std::string& id) {
  auto s = find(id);
  std::unique_lock lock(s->busy, std::try_to_lock);
  if (!lock.owns_lock()) throw BusyError("session '" + id + "' is handling another request; retry");
  if (s->history.empty()) throw ConflictError("session '" + id + "' has nothing to undo");
  s->history.pop_back();
  replay(*s);
  return payload(*s);
}

json Service::suggestion(const std::string& id) {
  auto s = find(id);
  std::unique_lock lock(s->busy, std::try_to_lock);
  if (!lock.owns_lock()) throw BusyError("session '" + id + "' is handling another request; retry");
  const auto next = next_concept(*s);
  return {{"session_id", id},
          {"checkpoint_hash", hash_},
          {"policy", intervention::to_string(opts_.policy)},
          {"suggestion", next ? json(*next) : json(nullptr)},
          {"probability", next ? json(s->state.concept_probs(*next)) : json(nullptr)}};
}

json Service::correlation(const std::optional<std::string>& session_id) {
  Matrix corr;
  json out = {{"checkpoint_hash", hash_}, {"variant", to_string(ck_.model.variant())}};
  if (session_id) {
    auto s = find(*session_id);
    std::unique_lock lock(s->busy, std::try_to_lock);
    if (!lock.owns_lock()) throw BusyError("session '" + *session_id + "' is handling another request; retry");
    corr = experiment::export_correlation(ck_, s->x);
    out["scope"] = ck_.model.variant() == Variant::Amortized ? "session" : "global";
    out["session_id"] = *session_id;
  } else {
    if (ck_.model.variant() == Variant::Amortized)
      throw UsageError("amortized model: the correlation depends on the instance; pass a session");
    corr = experiment::export_correlation(ck_);
    out["scope"] = "global";
  }
  json rows = json::array();
  for (Index i = 0; i < corr.rows(); ++i) rows.push_back(to_array(corr.row(i).transpose()));
  out["matrix"] = rows;
  return out;
}

json Service::health() const {
  std::shared_lock lock(sessions_mu_);
  return {{"status", "ok"},
          {"checkpoint_hash", hash_},
          {"variant", to_string(ck_.model.variant())},
          {"num_features", ck_.model.num_features()},
          {"num_concepts", ck_.model.num_concepts()},
          {"num_classes", ck_.model.num_classes()},
          {"test_rows", test_rows_.size()},
          {"sessions", sessions_.size()}};
}

json Service::snapshot() const {
  std::shared_lock lock(sessions_mu_);
  json sessions = json::array();
  for (const auto& [id, s] : sessions_) {
    std::lock_guard session_lock(s->busy);
    json history = json::array();
    for (const auto& a : s->history)
      history.push_back({{"concept", a.concept_index}, {"value", a.value}, {"timestamp", a.timestamp}});
    sessions.push_back({{"id", id}, {"selector", s->selector}, {"history", history}});
  }
  return {{"format", "scbm-sessions"},
          {"version", 1},
          {"checkpoint_hash", hash_},
          {"next_id", next_id_},
          {"sessions", sessions}};
}

void Service::restore(const json& snap) {
  if (!snap.is_object() || snap.value("format", "") != "scbm-sessions") throw IoError("not a session snapshot");
  if (snap.value("version", 0) != 1) throw VersionError(snap.value("version", 0u), 1);
  if (snap.at("checkpoint_hash").get<std::string>() != hash_)
    throw ConflictError("snapshot was taken with a different checkpoint");
  std::map<std::string, std::shared_ptr<Session>> restored;
  for (const auto& entry : snap.at("sessions")) {
    const std::string id = entry.at("id").get<std::string>();
    json selector = entry.at("selector");
    if (selector.contains("test_index")) selector.erase("row");
    auto s = build_session(id, selector);
    for (const auto& a : entry.at("history"))
      s->history.push_back({a.at("concept").get<Index>(), a.at("value").get<int>(), a.at("timestamp").get<std::string>()});
    replay(*s);
    restored[id] = s;
  }
  std::unique_lock lock(sessions_mu_);
  sessions_ = std::move(restored);
  next_id_ = snap.at("next_id").get<std::uint64_t>();
}

}  // namespace scbm::serve
