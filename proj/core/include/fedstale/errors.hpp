#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedstale {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or out-of-range experiment configuration.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, std::size_t line, const std::string& message);

  const std::string& key() const { return key_; }
  /// 1-based line in the config file, 0 when the value came from elsewhere.
  std::size_t line() const { return line_; }

 private:
  std::string key_;
  std::size_t line_;
};

/// A local iterate or the global model left the finite range.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t client, std::size_t round, std::size_t step,
                  const std::string& message);

  std::size_t client() const { return client_; }
  std::size_t round() const { return round_; }
  std::size_t step() const { return step_; }

 private:
  std::size_t client_;
  std::size_t round_;
  std::size_t step_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Biased FedAvg has no defined value for an empty participant set.
class NoParticipantsError : public Error {
 public:
  explicit NoParticipantsError(std::size_t round);
  std::size_t round() const { return round_; }

 private:
  std::size_t round_;
};

}  // namespace fedstale
