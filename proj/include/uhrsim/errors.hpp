#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace uhrsim {

struct ConfigIssue {
  int line = 0;  // 0 when not tied to a line of input
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::string message) : ConfigError(std::vector<ConfigIssue>{{0, std::move(message)}}) {}
  explicit ConfigError(std::vector<ConfigIssue> issues)
      : std::runtime_error(render(issues)), issues_(std::move(issues)) {}

  const std::vector<ConfigIssue>& issues() const { return issues_; }

 private:
  static std::string render(const std::vector<ConfigIssue>& issues) {
    std::string out;
    for (const auto& i : issues) {
      if (!out.empty()) out += '\n';
      if (i.line > 0) out += "line " + std::to_string(i.line) + ": ";
      out += i.message;
    }
    return out;
  }

  std::vector<ConfigIssue> issues_;
};

/// A run violated an accounting or airtime invariant.
class AuditFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace uhrsim
