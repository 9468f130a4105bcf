#pragma once

#include <stdexcept>
#include <string>

namespace emm {

enum class ErrorCode {
  InvalidArgument,
  InvalidFamily,
  OutOfSupport,
  NotPositiveDefinite,
  Unavailable,
  UnsupportedGradient,
  Mismatch,
  DegenerateGrid,
  StepTooLarge,
  GenerationFailed,
  Io,
};

[[nodiscard]] const char *to_string(ErrorCode code) noexcept;

/// Single exception type for the library; the code distinguishes failure
/// classes callers are expected to handle (e.g. StepTooLarge in the fit loop).
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace emm
