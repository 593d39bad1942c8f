#include "scbm/nn/param_store.hpp"

#include "scbm/error.hpp"

namespace scbm::nn {

Matrix& ParamStore::add(const std::string& name, Matrix value, bool trainable) {
  if (contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{name, std::move(value), trainable});
  return entries_.back().value;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second];
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries_[it->second];
}

Matrix& ParamStore::at(const std::string& name) { return entry(name).value; }
const Matrix& ParamStore::at(const std::string& name) const { return entry(name).value; }

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& e : entries_)
    out.add(e.name, Matrix::Zero(e.value.rows(), e.value.cols()), e.trainable);
  return out;
}

std::size_t ParamStore::trainable_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_)
    if (e.trainable) n += static_cast<std::size_t>(e.value.size());
  return n;
}

bool ParamStore::all_finite() const {
  for (const auto& e : entries_)
    if (!e.value.allFinite()) return false;
  return true;
}

bool operator==(const ParamStore& a, const ParamStore& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto& x = a.entries_[i];
    const auto& y = b.entries_[i];
    if (x.name != y.name || x.trainable != y.trainable) return false;
    if (x.value.rows() != y.value.rows() || x.value.cols() != y.value.cols()) return false;
    if (x.value != y.value) return false;
  }
  return true;
}

}  // namespace scbm::nn
