#include "agcam/error.hpp"

namespace agcam {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::kUnknownModel: return "UnknownModel";
    case ErrorCode::kWeightsUnavailable: return "WeightsUnavailable";
    case ErrorCode::kArchitectureUnsupported: return "ArchitectureUnsupported";
    case ErrorCode::kImageDecodeError: return "ImageDecodeError";
    case ErrorCode::kSequenceTooLong: return "SequenceTooLong";
    case ErrorCode::kPreconditionViolation: return "PreconditionViolation";
    case ErrorCode::kCaptureUnsupported: return "CaptureUnsupported";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kGenerationTimeout: return "GenerationTimeout";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kEmptyRange: return "EmptyRange";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNegativeInput: return "NegativeInput";
    case ErrorCode::kInvalidTokenSelector: return "InvalidTokenSelector";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kReentryUnsupported: return "ReentryUnsupported";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kMissingImage: return "MissingImage";
    case ErrorCode::kAuthError: return "AuthError";
    case ErrorCode::kRateLimited: return "RateLimited";
    case ErrorCode::kProviderError: return "ProviderError";
    case ErrorCode::kEmptySteps: return "EmptySteps";
    case ErrorCode::kPortInUse: return "PortInUse";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kRuntimeUnavailable: return "RuntimeUnavailable";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string &message, std::string field)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), field_(std::move(field)) {}

} // namespace agcam
