#pragma once

#include <stdexcept>
#include <string>

namespace cdt {

// Error categories carried by every exception so the C API can translate
// them into stable status codes.
enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  io,
  bad_magic,
  bad_version,
  bad_format,
  truncated,
  bad_config,
  bad_state,
  conditions_unmet,
  assertion_failed,
  internal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace cdt
