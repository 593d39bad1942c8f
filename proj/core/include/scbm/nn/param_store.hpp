#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace scbm::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Named collection of 64-bit matrices. Insertion order is the stable iteration
/// order (and the serialization order). Non-trainable entries hold buffers such
/// as batch-norm running statistics.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Matrix value;
    bool trainable = true;
  };

  /// Adds a new entry; throws ConfigError if the name already exists.
  Matrix& add(const std::string& name, Matrix value, bool trainable = true);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  /// Same names and shapes, all values zero.
  ParamStore zeros_like() const;

  /// Total number of scalars over trainable entries.
  std::size_t trainable_size() const;

  bool all_finite() const;

  friend bool operator==(const ParamStore& a, const ParamStore& b);

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace scbm::nn
