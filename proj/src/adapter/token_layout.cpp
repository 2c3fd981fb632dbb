#include "agcam/adapter/token_layout.hpp"

#include "agcam/error.hpp"

#include <string>

namespace agcam {

void TokenLayout::validate() const {
    const auto fail = [](const std::string &msg) { throw Error(ErrorCode::kShapeMismatch, "token layout: " + msg); };
    if (total_len <= 0) fail("empty sequence");
    if (image_span.begin < 0 || image_span.end > total_len || image_span.size() < 0) fail("image span out of bounds");
    if (query_span.begin < 0 || query_span.end > total_len || query_span.size() < 0) fail("query span out of bounds");
    if (image_span.size() != grid_rows * grid_cols) fail("image span does not match the patch grid");
    if (static_cast<int>(token_texts.size()) != total_len) fail("token_texts must cover every position");

    std::vector<int> owners(static_cast<std::size_t>(total_len), 0);
    for (int i = image_span.begin; i < image_span.end; ++i) ++owners[i];
    for (int i = query_span.begin; i < query_span.end; ++i) ++owners[i];
    for (const auto &[role, pos] : special_positions) {
        if (pos < 0 || pos >= total_len) fail("special position out of bounds");
        ++owners[pos];
    }
    for (int i = 0; i < total_len; ++i) {
        if (owners[i] != 1) fail("position " + std::to_string(i) + " is not owned by exactly one span");
    }
    if (total_len != image_span.size() + query_span.size() + static_cast<int>(special_positions.size())) {
        fail("S != S_I + S_Q + specials");
    }
}

std::pair<int, int> TokenLayout::grid_coords(int index) const {
    if (!image_span.contains(index)) {
        throw Error(ErrorCode::kIndexOutOfRange, "position " + std::to_string(index) + " is not an image token");
    }
    const int offset = index - image_span.begin;
    return {offset / grid_cols, offset % grid_cols};
}

int TokenLayout::index_at(int row, int col) const {
    if (row < 0 || row >= grid_rows || col < 0 || col >= grid_cols) {
        throw Error(ErrorCode::kIndexOutOfRange, "grid cell out of range");
    }
    return image_span.begin + row * grid_cols + col;
}

std::optional<int> TokenLayout::special_position(SpecialRole role) const {
    if (auto it = special_positions.find(role); it != special_positions.end()) {
        return it->second;
    }
    return std::nullopt;
}

bool TokenLayout::is_special(int index) const {
    for (const auto &[role, pos] : special_positions) {
        if (pos == index) return true;
    }
    return false;
}

} // namespace agcam
