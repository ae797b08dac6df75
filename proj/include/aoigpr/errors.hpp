#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace aoigpr {

/// Malformed config text. Carries the 1-based line when known (0 otherwise).
class ConfigParseError : public std::runtime_error {
 public:
  ConfigParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// One or more invariant violations; every violated constraint is listed.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> issues)
      : std::runtime_error(join(issues)), issues_(std::move(issues)) {}
  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid configuration:";
    for (const auto& i : v) s += "\n  - " + i;
    return s;
  }
  std::vector<std::string> issues_;
};

/// Gram matrix could not be factorized, even after jitter escalation.
class SingularKernelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalDomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace aoigpr
