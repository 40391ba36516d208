#pragma once

#include <stdexcept>
#include <string>

namespace needscope {

enum class ErrorCode {
  kInvalidArgument,
  kConfig,
  kIo,
  kParse,
  kValidation,
  kUndefined,
  kOutOfRange,
  kInsufficientData,
  kInternal,
};

const char* to_string(ErrorCode code);

// Single exception type for the core; the C API maps `code()` onto status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace needscope
