#pragma once

#include <stdexcept>
#include <string>

namespace memgan {

/// Broad failure class; the CLI maps each one to a distinct exit code.
enum class ErrorCategory {
  config = 2,   // invalid parameters or config file contents
  shape = 3,    // tensor / crossbar dimension mismatch
  format = 4,   // malformed input file (IDX, checkpoint)
  io = 5,       // file cannot be opened, read or written
  numeric = 6,  // NaN / divergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

inline const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::format: return "format";
    case ErrorCategory::io: return "io";
    case ErrorCategory::numeric: return "numeric";
  }
  return "unknown";
}

}  // namespace memgan
