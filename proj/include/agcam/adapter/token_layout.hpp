#pragma once

#include "agcam/adapter/descriptor.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace agcam {

// Half-open [begin, end).
struct IndexRange {
    int begin = 0;
    int end = 0;

    int size() const { return end - begin; }
    bool contains(int i) const { return i >= begin && i < end; }
    bool operator==(const IndexRange &) const = default;
};

enum class PatchOrder { kRowMajor };

// Partition of a fused sequence S = image tokens || query tokens plus special
// tokens. The image span is laid out on the patch grid in `patch_order`.
struct TokenLayout {
    int total_len = 0;
    IndexRange image_span;
    IndexRange query_span;
    std::map<SpecialRole, int> special_positions;
    PatchOrder patch_order = PatchOrder::kRowMajor;
    int grid_rows = 0;
    int grid_cols = 0;
    // One entry per position; empty for image positions.
    std::vector<std::string> token_texts;

    // Throws ShapeMismatch when the partition or the grid geometry is broken.
    void validate() const;

    // (row, col) of an image position; IndexOutOfRange outside the image span.
    std::pair<int, int> grid_coords(int index) const;
    int index_at(int row, int col) const;

    std::optional<int> special_position(SpecialRole role) const;
    bool is_special(int index) const;

    bool operator==(const TokenLayout &) const = default;
};

} // namespace agcam
