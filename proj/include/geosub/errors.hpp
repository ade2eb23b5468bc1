#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace geosub {

/// Thrown for malformed inputs: wrong shapes, invalid configuration values,
/// unreadable files. The CLI maps it to exit status 1.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical procedure cannot produce a trustworthy result
/// (rank deficiency, SVD non-convergence, non-finite objective, line-search
/// breakdown). Carries machine-readable diagnostics; the CLI maps it to
/// exit status 2 and writes the diagnostics next to the outputs.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what,
                          nlohmann::json diagnostics = nlohmann::json::object())
      : std::runtime_error(what), diagnostics_(std::move(diagnostics)) {}

  const nlohmann::json& diagnostics() const noexcept { return diagnostics_; }

 private:
  nlohmann::json diagnostics_;
};

}  // namespace geosub
