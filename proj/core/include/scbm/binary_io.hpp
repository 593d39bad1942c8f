#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "scbm/error.hpp"

namespace scbm::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// CRC-32 (zlib polynomial) of a byte range.
std::uint32_t crc32(const std::uint8_t* data, std::size_t size);

class ByteWriter {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  template <typename T>
  void pod(T v) {
    bytes(&v, sizeof(T));
  }
  void string(std::string_view s) {
    pod<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  /// Column-major payload, no shape prefix.
  void doubles(const Eigen::MatrixXd& m) { bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size())); }

  /// Appends the CRC-32 of everything written so far.
  void seal() { pod<std::uint32_t>(crc32(buf_.data(), buf_.size())); }

  const std::vector<std::uint8_t>& buffer() const { return buf_; }
  void write_file(const std::string& path) const;

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> data, std::string what)
      : data_(std::move(data)), what_(std::move(what)) {}

  static ByteReader from_file(const std::string& path, std::string what);

  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof(T));
    return v;
  }
  std::string string() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Eigen::MatrixXd doubles(Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    return m;
  }

  /// Verifies the trailing CRC-32 over all bytes before it. Call after the
  /// version check so that a newer file reports its version, not a checksum.
  void verify_checksum() const;
  /// Throws IoError if payload bytes remain before the checksum.
  void expect_end() const;

  const std::vector<std::uint8_t>& data() const { return data_; }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() || pos_ > data_.size() - n)
      throw IoError("truncated " + what_ + ": needed " + std::to_string(n) + " bytes at offset " +
                    std::to_string(pos_) + " of " + std::to_string(data_.size()));
  }

  std::vector<std::uint8_t> data_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace scbm::io
