#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sentinel {

/// Base class for every error raised by the pipeline. The message is meant
/// to be shown to a user as-is.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed text input. Carries the offending line number
/// (1-based) when one is known.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, int line, const std::string& what);

  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Collects non-fatal conditions (degenerate calibration, empty metric input,
/// short series...) so callers can surface them in reports.
using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string message) {
  if (sink != nullptr) sink->push_back(std::move(message));
}

}  // namespace sentinel
