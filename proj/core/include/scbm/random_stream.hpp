#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace scbm {

/// Seeded source of standard-normal and uniform draws. Single owner; derive
/// independent streams with `derive` instead of sharing one across threads.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : RandomStream(make_seq(seed, {})) {}

  /// Stream keyed by (seed, path...). Distinct paths give independent sequences,
  /// and the result does not depend on how many other streams were derived.
  static RandomStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    return RandomStream(make_seq(seed, path));
  }

  double normal() { return normal_(engine_); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    double u = 0.0;
    do {
      u = uniform_(engine_);
    } while (u <= 0.0);
    return u;
  }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
  }

  std::uint64_t next_u64() { return engine_(); }

  template <typename Derived>
  void fill_normal(Eigen::MatrixBase<Derived>& out) {
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = normal();
  }

  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    // Row-major draw order so a single row is a contiguous slice of the sequence.
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
  }

  Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform();
    return m;
  }

 private:
  explicit RandomStream(std::seed_seq&& seq) : engine_(seq) {}

  static std::seed_seq make_seq(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * path.size());
    auto push = [&](std::uint64_t v) {
      words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
      words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto p : path) push(p);
    return std::seed_seq(words.begin(), words.end());
  }

  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace scbm
