#pragma once

#include <stdexcept>
#include <string>

namespace slowfast {

// Error categories; numeric values double as CLI exit codes.
enum class ErrorCode : int {
  kConfig = 1,        // invalid configuration or usage
  kVerification = 2,  // an oracle reported violations
  kRuntime = 3,       // NaN budget exceeded, I/O, estimator failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void throw_config(const std::string& what) { throw Error(ErrorCode::kConfig, what); }
[[noreturn]] inline void throw_runtime(const std::string& what) { throw Error(ErrorCode::kRuntime, what); }

}  // namespace slowfast
