#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ksg {

/// Error categories shared by every module. The C API maps these one to one
/// onto `ksg_status` values.
enum class ErrorCode {
  InvalidArgument = 1,
  Io,
  Parse,
  Schema,
  Validation,
  Config,
  Stage2Failure,
  ReplayMiss,
  Transport,
  Timeout,
  Immutable,
  Mismatch,
  NotFound,
  Internal,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace ksg
