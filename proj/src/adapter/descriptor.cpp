#include "agcam/adapter/descriptor.hpp"

#include "agcam/error.hpp"

namespace agcam {

std::string_view to_string(SpecialRole role) {
    switch (role) {
    case SpecialRole::kBos: return "bos";
    case SpecialRole::kSeparator: return "separator";
    case SpecialRole::kPad: return "pad";
    case SpecialRole::kEos: return "eos";
    }
    return "unknown";
}

std::optional<SpecialRole> special_role_from_string(std::string_view name) {
    if (name == "bos") return SpecialRole::kBos;
    if (name == "separator") return SpecialRole::kSeparator;
    if (name == "pad") return SpecialRole::kPad;
    if (name == "eos") return SpecialRole::kEos;
    return std::nullopt;
}

void ModelDescriptor::validate() const {
    if (num_layers < 1) throw Error(ErrorCode::kInvalidConfig, "num_layers must be >= 1", "num_layers");
    if (num_heads < 1) throw Error(ErrorCode::kInvalidConfig, "num_heads must be >= 1", "num_heads");
    if (vocab_size < 2) throw Error(ErrorCode::kInvalidConfig, "vocab_size must be >= 2", "vocab_size");
    if (grid_rows < 1 || grid_cols < 1) {
        throw Error(ErrorCode::kInvalidConfig, "patch grid must be non-empty", "grid_rows");
    }
    if (max_sequence_len < num_image_tokens()) {
        throw Error(ErrorCode::kInvalidConfig, "max_sequence_len cannot hold the image tokens", "max_sequence_len");
    }
}

} // namespace agcam
