#pragma once

#include <stdexcept>
#include <string>

namespace wtm {

/// Invalid or inconsistent configuration value. Carries the offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::invalid_argument(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

  /// Same error, message prefixed with the source line it came from.
  static ConfigError at_line(int line, const ConfigError& e) {
    return ConfigError(e.key_, "line " + std::to_string(line) + ": " + e.what(), Raw{});
  }

 private:
  struct Raw {};
  ConfigError(std::string key, const std::string& what, Raw) : std::invalid_argument(what), key_(std::move(key)) {}

  std::string key_;
};

/// Blow-up, eigensolver failure, or any result that is not a finite number.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wtm
