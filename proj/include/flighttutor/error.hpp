#pragma once

#include <stdexcept>
#include <string>

namespace ftutor {

enum class ErrorCode {
  InvalidArgument = 1,
  Io,
  Schema,
  Parse,
  Diverged,
  Network,
  Timeout,
  Internal,
};

/// Exception type thrown by the core library. The C API maps `code()` onto
/// its status enumeration.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ftutor
