#pragma once

#include "agcam/adapter/token_layout.hpp"
#include "agcam/core/saliency.hpp"
#include "agcam/image.hpp"

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agcam::render {

enum class Colormap { kRainbow5 };
enum class UpsampleMethod { kBilinear, kNearest };

std::string_view to_string(UpsampleMethod method);
UpsampleMethod upsample_from_string(std::string_view name);

struct RenderConfig {
    Colormap colormap = Colormap::kRainbow5;
    double alpha = 0.5;
    UpsampleMethod upsample = UpsampleMethod::kBilinear;

    // Throws PreconditionViolation unless alpha is in [0, 1].
    void validate() const;
};

struct ColorStop {
    double heat;
    std::array<double, 3> rgb;
};

// blue -> cyan -> green -> yellow -> red at heats 0, .25, .5, .75, 1.
inline constexpr std::array<ColorStop, 5> kRainbow5Stops = {{
    {0.00, {0.0, 0.0, 131.0}},
    {0.25, {0.0, 255.0, 255.0}},
    {0.50, {0.0, 255.0, 0.0}},
    {0.75, {255.0, 255.0, 0.0}},
    {1.00, {255.0, 0.0, 0.0}},
}};

// Linear RGB interpolation between stops; heat is clamped to [0, 1].
std::array<double, 3> colormap_rgb(double heat, Colormap map = Colormap::kRainbow5);

// {"name": "rainbow5", "stops": [[heat, r, g, b], ...]} for clients that draw legends.
nlohmann::json colormap_json(Colormap map = Colormap::kRainbow5);

// Row-major fill of the patch grid. Throws ShapeMismatch.
core::HeatGrid reshape_to_grid(std::span<const double> image_heat, const TokenLayout &layout);
core::HeatGrid reshape_to_grid(std::span<const double> image_heat, int grid_rows, int grid_cols);
std::vector<double> flatten(const core::HeatGrid &grid);

// Dense heat image of target_h rows by target_w cols. Bilinear sampling is
// corner-aligned (output corners coincide with grid corner cells); nearest
// replicates blocks. Throws PreconditionViolation for non-positive targets.
core::HeatGrid upsample(const core::HeatGrid &grid, int target_w, int target_h, UpsampleMethod method);

// out = (1 - alpha) * chart + alpha * colormap(heat) per channel, rounded.
// Returns RGBA with opaque alpha. Throws DimensionMismatch.
Image colorize_and_overlay(const core::HeatGrid &dense_heat, const Image &chart, const RenderConfig &config);

// Upsample + colorize a result's normalized grid onto the chart.
Image render_overlay(const core::SaliencyResult &result, const Image &chart, const RenderConfig &config = {});

struct SheetLayout {
    int margin = 8;
    int row_label_width = 120;
    int header_height = 28;
};

// Tiles equally sized panels (rows x cols) with column headers and row labels.
// Throws EmptyInput for no panels and DimensionMismatch for ragged input.
Image compose_contact_sheet(const std::vector<std::vector<Image>> &panels, const std::vector<std::string> &row_labels,
                            const std::vector<std::string> &col_labels, const SheetLayout &layout = {});

struct TokenLayerSheet {
    Image image;
    std::vector<int> column_tokens;
    std::vector<std::string> column_labels;
    std::vector<std::string> row_labels;
};

// Token-per-column, layer-range-per-row sheet: each inner vector holds the
// results of one layer range. Columns are ordered by token index.
TokenLayerSheet build_token_layer_sheet(const std::vector<std::vector<core::SaliencyResult>> &rows,
                                        const Image &chart, const RenderConfig &config = {},
                                        int panel_width = 160);

// {question_id}_{model_id}_{layers}.png
std::string contact_sheet_name(std::string_view question_id, std::string_view model_id,
                               const core::LayerRange &layers);

} // namespace agcam::render
