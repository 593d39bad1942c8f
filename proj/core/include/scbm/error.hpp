#pragma once

#include <stdexcept>
#include <string>

namespace scbm {

/// Base class for all library errors. `kind()` is a stable, machine-readable tag.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Shape mismatch or invalid configuration value.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

/// API misuse: consumed tape, conditioning on every index, empty split, ...
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error("usage", message) {}
};

/// Non-finite loss or gradient during optimization.
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& message) : Error("training", message) {}
};

class LinalgError : public Error {
 public:
  explicit LinalgError(const std::string& message) : Error("linalg", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
  IoError(std::string kind, const std::string& message) : Error(std::move(kind), message) {}
};

class ChecksumError : public IoError {
 public:
  explicit ChecksumError(const std::string& message) : IoError("checksum", message) {}
};

class VersionError : public IoError {
 public:
  VersionError(unsigned found, unsigned supported)
      : IoError("version", "file format version " + std::to_string(found) +
                               " is not supported (this build reads version " +
                               std::to_string(supported) + ")"),
        found_(found),
        supported_(supported) {}

  unsigned found() const noexcept { return found_; }
  unsigned supported() const noexcept { return supported_; }

 private:
  unsigned found_;
  unsigned supported_;
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& message) : Error("not_found", message) {}
};

class ConflictError : public Error {
 public:
  explicit ConflictError(const std::string& message) : Error("conflict", message) {}
};

}  // namespace scbm
