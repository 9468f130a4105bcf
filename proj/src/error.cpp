#include "emm/error.hpp"

namespace emm {

const char *to_string(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::InvalidArgument: return "invalid argument";
  case ErrorCode::InvalidFamily: return "invalid family";
  case ErrorCode::OutOfSupport: return "out of support";
  case ErrorCode::NotPositiveDefinite: return "not positive definite";
  case ErrorCode::Unavailable: return "unavailable";
  case ErrorCode::UnsupportedGradient: return "unsupported gradient";
  case ErrorCode::Mismatch: return "mismatch";
  case ErrorCode::DegenerateGrid: return "degenerate grid";
  case ErrorCode::StepTooLarge: return "step too large";
  case ErrorCode::GenerationFailed: return "generation failed";
  case ErrorCode::Io: return "i/o error";
  }
  return "unknown error";
}

} // namespace emm
