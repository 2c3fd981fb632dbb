#include "agcam/adapter/model_handle.hpp"

#include "agcam/error.hpp"

namespace agcam {

void GenerationConfig::validate() const {
    if (max_new_tokens < 1) throw Error(ErrorCode::kPreconditionViolation, "max_new_tokens must be >= 1", "max_new_tokens");
    if (!(temperature >= 0.0)) throw Error(ErrorCode::kPreconditionViolation, "temperature must be >= 0", "temperature");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(ErrorCode::kPreconditionViolation, "top_p must be in (0, 1]", "top_p");
}

FusedInputs ModelHandle::encode_inputs(const Image &image, std::string_view question) {
    if (question.empty()) {
        throw Error(ErrorCode::kPreconditionViolation, "question must be non-empty", "question");
    }
    if (image.empty()) {
        throw Error(ErrorCode::kImageDecodeError, "image has no pixels");
    }
    std::lock_guard lock(session_mutex_);
    auto inputs = do_encode_inputs(image, question);
    inputs.layout.validate();
    return inputs;
}

AttentionTrace ModelHandle::forward_backward_capture(const FusedInputs &inputs, NormMode norm_mode) {
    if (!supports_capture()) {
        throw Error(ErrorCode::kCaptureUnsupported, descriptor().model_id + " cannot expose attention internals");
    }
    if (inputs.model_id != descriptor().model_id) {
        throw Error(ErrorCode::kPreconditionViolation, "inputs were encoded by a different model");
    }
    std::lock_guard lock(session_mutex_);
    return do_capture(inputs, norm_mode);
}

std::string ModelHandle::generate_answer(const Image &image, std::string_view question, const GenerationConfig &config) {
    if (question.empty()) {
        throw Error(ErrorCode::kPreconditionViolation, "question must be non-empty", "question");
    }
    if (image.empty()) {
        throw Error(ErrorCode::kImageDecodeError, "image has no pixels");
    }
    config.validate();
    std::lock_guard lock(session_mutex_);
    return do_generate(image, question, config);
}

} // namespace agcam
