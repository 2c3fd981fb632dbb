#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace agcam {

enum class ErrorCode {
    kUnknownModel,
    kWeightsUnavailable,
    kArchitectureUnsupported,
    kImageDecodeError,
    kSequenceTooLong,
    kPreconditionViolation,
    kCaptureUnsupported,
    kNonFiniteGradient,
    kGenerationTimeout,
    kIndexOutOfRange,
    kEmptyRange,
    kShapeMismatch,
    kNegativeInput,
    kInvalidTokenSelector,
    kInvalidConfig,
    kReentryUnsupported,
    kDimensionMismatch,
    kEmptyInput,
    kSchemaError,
    kMissingImage,
    kAuthError,
    kRateLimited,
    kProviderError,
    kEmptySteps,
    kPortInUse,
    kNotFound,
    kIoError,
    kRuntimeUnavailable,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library. `field` names the offending input
// (a JSON path for schema errors, a request field for validation errors).
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &message, std::string field = {});

    ErrorCode code() const noexcept { return code_; }
    const std::string &field() const noexcept { return field_; }

  private:
    ErrorCode code_;
    std::string field_;
};

} // namespace agcam
