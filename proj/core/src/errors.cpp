#include "fedstale/errors.hpp"

#include <string>

namespace fedstale {

namespace {

std::string config_what(const std::string& key, std::size_t line,
                        const std::string& message) {
  std::string out = "config";
  if (line > 0) out += " line " + std::to_string(line);
  if (!key.empty()) out += " key '" + key + "'";
  return out + ": " + message;
}

}  // namespace

ConfigError::ConfigError(std::string key, std::size_t line, const std::string& message)
    : Error(config_what(key, line, message)), key_(std::move(key)), line_(line) {}

DivergenceError::DivergenceError(std::size_t client, std::size_t round,
                                 std::size_t step, const std::string& message)
    : Error(message), client_(client), round_(round), step_(step) {}

NoParticipantsError::NoParticipantsError(std::size_t round)
    : Error("no participants in round " + std::to_string(round)), round_(round) {}

}  // namespace fedstale
