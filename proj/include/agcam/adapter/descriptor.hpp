#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace agcam {

enum class SpecialRole { kBos, kSeparator, kPad, kEos };

std::string_view to_string(SpecialRole role);
std::optional<SpecialRole> special_role_from_string(std::string_view name);

// Static architecture facts of one early-fusion model. `num_layers` counts
// language-model transformer blocks only; vision-tower layers are not included.
struct ModelDescriptor {
    std::string model_id;
    int num_layers = 0;
    int num_heads = 0;
    int patch_size = 0;
    int grid_rows = 0;
    int grid_cols = 0;
    int image_embed_dim = 0;
    int adapted_embed_dim = 0;
    int vocab_size = 0;
    std::map<SpecialRole, int> special_token_ids;
    int max_sequence_len = 0;

    int num_image_tokens() const { return grid_rows * grid_cols; }

    // Throws InvalidConfig when K < 1, H < 1, v < 2 or the grid is empty.
    void validate() const;

    bool operator==(const ModelDescriptor &) const = default;
};

} // namespace agcam
