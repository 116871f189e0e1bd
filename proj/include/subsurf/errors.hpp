/*
 * (C) Copyright 2026 The subsurf Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace subsurf {

/// Invalid argument or out-of-domain input (non-positive K, cell outside grid, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation failed numerically: solver residual too large, non-finite values,
/// degenerate eigen-spectrum.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Generator description and weights disagree, or a latent vector has the wrong shape.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One problem found while validating a run configuration.
struct ConfigIssue {
  std::size_t line = 0;  // 1-based; 0 when the problem is a missing key
  std::string key;
  std::string message;
};

/// Configuration text or command-line arguments failed validation. Carries every issue found.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : std::invalid_argument(format(issues)), issues_(std::move(issues)) {}
  explicit ConfigError(const std::string& message)
      : ConfigError(std::vector<ConfigIssue>{{0, "", message}}) {}

  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  static std::string format(const std::vector<ConfigIssue>& issues) {
    std::string out;
    for (const auto& i : issues) {
      if (!out.empty()) out += '\n';
      if (i.line > 0) out += "line " + std::to_string(i.line) + ": ";
      if (!i.key.empty()) out += i.key + ": ";
      out += i.message;
    }
    return out;
  }
  std::vector<ConfigIssue> issues_;
};

}  // namespace subsurf
