#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace udfsketch {

/// Machine-readable failure categories. The session API reports these names verbatim.
enum class ErrorCode {
  bounds_error,
  empty_region,
  empty_ink,
  shape_error,
  parameter_error,
  state_error,
  configuration_error,
  generation_error,
  format_error,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::bounds_error: return "bounds_error";
    case ErrorCode::empty_region: return "empty_region";
    case ErrorCode::empty_ink: return "empty_ink";
    case ErrorCode::shape_error: return "shape_error";
    case ErrorCode::parameter_error: return "parameter_error";
    case ErrorCode::state_error: return "state_error";
    case ErrorCode::configuration_error: return "configuration_error";
    case ErrorCode::generation_error: return "generation_error";
    case ErrorCode::format_error: return "format_error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const char* what) {
  if (!condition) fail(code, what);
}

}  // namespace udfsketch
