#include "agcam/render/render.hpp"

#include "agcam/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <opencv2/imgproc.hpp>
#include <set>

namespace agcam::render {

std::string_view to_string(UpsampleMethod method) {
    return method == UpsampleMethod::kBilinear ? "bilinear" : "nearest";
}

UpsampleMethod upsample_from_string(std::string_view name) {
    if (name == "bilinear") return UpsampleMethod::kBilinear;
    if (name == "nearest") return UpsampleMethod::kNearest;
    throw Error(ErrorCode::kPreconditionViolation, "upsample must be bilinear or nearest", "upsample");
}

void RenderConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw Error(ErrorCode::kPreconditionViolation, "alpha must lie in [0, 1]", "alpha");
    }
}

std::array<double, 3> colormap_rgb(double heat, Colormap) {
    const double t = std::clamp(heat, 0.0, 1.0);
    for (std::size_t i = 1; i < kRainbow5Stops.size(); ++i) {
        const auto &lo = kRainbow5Stops[i - 1];
        const auto &hi = kRainbow5Stops[i];
        if (t <= hi.heat) {
            const double w = (t - lo.heat) / (hi.heat - lo.heat);
            return {lo.rgb[0] + w * (hi.rgb[0] - lo.rgb[0]), lo.rgb[1] + w * (hi.rgb[1] - lo.rgb[1]),
                    lo.rgb[2] + w * (hi.rgb[2] - lo.rgb[2])};
        }
    }
    return kRainbow5Stops.back().rgb;
}

nlohmann::json colormap_json(Colormap) {
    nlohmann::json stops = nlohmann::json::array();
    for (const auto &s : kRainbow5Stops) stops.push_back({s.heat, s.rgb[0], s.rgb[1], s.rgb[2]});
    return {{"name", "rainbow5"}, {"interpolation", "linear_rgb"}, {"stops", stops}};
}

core::HeatGrid reshape_to_grid(std::span<const double> image_heat, int grid_rows, int grid_cols) {
    if (grid_rows < 1 || grid_cols < 1 || static_cast<int>(image_heat.size()) != grid_rows * grid_cols) {
        throw Error(ErrorCode::kShapeMismatch, "cannot reshape " + std::to_string(image_heat.size()) +
                                                   " values to " + std::to_string(grid_rows) + "x" +
                                                   std::to_string(grid_cols));
    }
    return {grid_rows, grid_cols, std::vector<double>(image_heat.begin(), image_heat.end())};
}

core::HeatGrid reshape_to_grid(std::span<const double> image_heat, const TokenLayout &layout) {
    return reshape_to_grid(image_heat, layout.grid_rows, layout.grid_cols);
}

std::vector<double> flatten(const core::HeatGrid &grid) { return grid.values; }

core::HeatGrid upsample(const core::HeatGrid &grid, int target_w, int target_h, UpsampleMethod method) {
    if (target_w <= 0 || target_h <= 0) {
        throw Error(ErrorCode::kPreconditionViolation, "upsample targets must be positive");
    }
    if (grid.rows < 1 || grid.cols < 1) throw Error(ErrorCode::kShapeMismatch, "empty heat grid");
    core::HeatGrid out{target_h, target_w, std::vector<double>(static_cast<std::size_t>(target_w) * target_h)};

    if (method == UpsampleMethod::kNearest) {
        for (int y = 0; y < target_h; ++y) {
            const int r = static_cast<int>(static_cast<long long>(y) * grid.rows / target_h);
            for (int x = 0; x < target_w; ++x) {
                const int c = static_cast<int>(static_cast<long long>(x) * grid.cols / target_w);
                out.at(y, x) = grid.at(r, c);
            }
        }
        return out;
    }

    const auto source_coord = [](int i, int target, int cells) {
        if (target == 1 || cells == 1) return 0.0;
        return static_cast<double>(i) * (cells - 1) / (target - 1);
    };
    for (int y = 0; y < target_h; ++y) {
        const double fy = source_coord(y, target_h, grid.rows);
        const int r0 = std::min(static_cast<int>(fy), grid.rows - 1);
        const int r1 = std::min(r0 + 1, grid.rows - 1);
        const double wy = fy - r0;
        for (int x = 0; x < target_w; ++x) {
            const double fx = source_coord(x, target_w, grid.cols);
            const int c0 = std::min(static_cast<int>(fx), grid.cols - 1);
            const int c1 = std::min(c0 + 1, grid.cols - 1);
            const double wx = fx - c0;
            const double top = grid.at(r0, c0) + wx * (grid.at(r0, c1) - grid.at(r0, c0));
            const double bottom = grid.at(r1, c0) + wx * (grid.at(r1, c1) - grid.at(r1, c0));
            double v = top + wy * (bottom - top);
            // Convex combination; clamp away rounding excursions.
            const double lo = std::min({grid.at(r0, c0), grid.at(r0, c1), grid.at(r1, c0), grid.at(r1, c1)});
            const double hi = std::max({grid.at(r0, c0), grid.at(r0, c1), grid.at(r1, c0), grid.at(r1, c1)});
            out.at(y, x) = std::clamp(v, lo, hi);
        }
    }
    return out;
}

Image colorize_and_overlay(const core::HeatGrid &dense_heat, const Image &chart, const RenderConfig &config) {
    config.validate();
    if (dense_heat.cols != chart.width || dense_heat.rows != chart.height) {
        throw Error(ErrorCode::kDimensionMismatch, "heat is " + std::to_string(dense_heat.cols) + "x" +
                                                       std::to_string(dense_heat.rows) + ", chart is " +
                                                       std::to_string(chart.width) + "x" +
                                                       std::to_string(chart.height));
    }
    if (chart.channels < 3) throw Error(ErrorCode::kDimensionMismatch, "chart must be RGB or RGBA");
    Image out(chart.width, chart.height, 4, 255);
    const double keep = 1.0 - config.alpha;
    for (int y = 0; y < chart.height; ++y) {
        for (int x = 0; x < chart.width; ++x) {
            const auto color = colormap_rgb(dense_heat.at(y, x), config.colormap);
            for (int c = 0; c < 3; ++c) {
                const double blended = keep * chart.at(x, y, c) + config.alpha * color[c];
                out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround(blended), 0L, 255L));
            }
        }
    }
    return out;
}

Image render_overlay(const core::SaliencyResult &result, const Image &chart, const RenderConfig &config) {
    const auto dense = upsample(result.normalized_grid, chart.width, chart.height, config.upsample);
    return colorize_and_overlay(dense, chart, config);
}

namespace {

cv::Mat as_rgb_mat(const Image &image) {
    cv::Mat mat(image.height, image.width, image.channels == 4 ? CV_8UC4 : CV_8UC3,
                const_cast<std::uint8_t *>(image.pixels.data()));
    cv::Mat rgb;
    if (image.channels == 4) {
        cv::cvtColor(mat, rgb, cv::COLOR_RGBA2RGB);
    } else {
        rgb = mat.clone();
    }
    return rgb;
}

std::string printable(std::string_view text) {
    std::string out;
    for (unsigned char c : text) out += (c >= 32 && c < 127) ? static_cast<char>(c) : '?';
    if (out == " ") out = "' '";
    return out;
}

void draw_label(cv::Mat &canvas, const std::string &text, cv::Rect box) {
    const int font = cv::FONT_HERSHEY_SIMPLEX;
    double scale = 0.45;
    int baseline = 0;
    cv::Size size = cv::getTextSize(text, font, scale, 1, &baseline);
    while (size.width > box.width - 4 && scale > 0.2) {
        scale -= 0.05;
        size = cv::getTextSize(text, font, scale, 1, &baseline);
    }
    const cv::Point origin(box.x + std::max(2, (box.width - size.width) / 2),
                           box.y + (box.height + size.height) / 2);
    cv::putText(canvas, text, origin, font, scale, cv::Scalar(20, 20, 20), 1, cv::LINE_8);
}

} // namespace

Image compose_contact_sheet(const std::vector<std::vector<Image>> &panels, const std::vector<std::string> &row_labels,
                            const std::vector<std::string> &col_labels, const SheetLayout &layout) {
    if (panels.empty() || panels.front().empty()) throw Error(ErrorCode::kEmptyInput, "contact sheet needs panels");
    const int rows = static_cast<int>(panels.size());
    const int cols = static_cast<int>(panels.front().size());
    const int pw = panels.front().front().width;
    const int ph = panels.front().front().height;
    for (const auto &row : panels) {
        if (static_cast<int>(row.size()) != cols) throw Error(ErrorCode::kDimensionMismatch, "ragged panel grid");
        for (const auto &p : row) {
            if (p.width != pw || p.height != ph) throw Error(ErrorCode::kDimensionMismatch, "panels differ in size");
        }
    }

    const int width = layout.row_label_width + cols * (pw + layout.margin) + layout.margin;
    const int height = layout.header_height + rows * (ph + layout.margin) + layout.margin;
    cv::Mat canvas(height, width, CV_8UC3, cv::Scalar(255, 255, 255));
    for (int c = 0; c < cols; ++c) {
        const int x = layout.row_label_width + layout.margin + c * (pw + layout.margin);
        if (c < static_cast<int>(col_labels.size())) {
            draw_label(canvas, printable(col_labels[c]), cv::Rect(x, 0, pw, layout.header_height));
        }
    }
    for (int r = 0; r < rows; ++r) {
        const int y = layout.header_height + r * (ph + layout.margin);
        if (r < static_cast<int>(row_labels.size())) {
            draw_label(canvas, printable(row_labels[r]), cv::Rect(0, y, layout.row_label_width, ph));
        }
        for (int c = 0; c < cols; ++c) {
            const int x = layout.row_label_width + layout.margin + c * (pw + layout.margin);
            as_rgb_mat(panels[r][c]).copyTo(canvas(cv::Rect(x, y, pw, ph)));
        }
    }

    Image out(width, height, 3);
    std::copy(canvas.datastart, canvas.dataend, out.pixels.begin());
    return out;
}

TokenLayerSheet build_token_layer_sheet(const std::vector<std::vector<core::SaliencyResult>> &rows,
                                        const Image &chart, const RenderConfig &config, int panel_width) {
    std::map<int, std::string> tokens;
    for (const auto &row : rows) {
        for (const auto &r : row) tokens.emplace(r.token_index, r.token_text);
    }
    if (tokens.empty()) throw Error(ErrorCode::kEmptyInput, "no saliency results to tile");

    const int panel_height = std::max(1, static_cast<int>(std::lround(static_cast<double>(chart.height) *
                                                                      panel_width / chart.width)));
    TokenLayerSheet sheet;
    for (const auto &[index, text] : tokens) {
        sheet.column_tokens.push_back(index);
        sheet.column_labels.push_back(text);
    }
    std::vector<std::vector<Image>> panels;
    for (const auto &row : rows) {
        std::vector<Image> line;
        for (int token : sheet.column_tokens) {
            auto it = std::find_if(row.begin(), row.end(), [&](const auto &r) { return r.token_index == token; });
            if (it == row.end()) {
                line.emplace_back(panel_width, panel_height, 3, 200);
            } else {
                line.push_back(resize_area(render_overlay(*it, chart, config), panel_width, panel_height));
            }
        }
        panels.push_back(std::move(line));
        sheet.row_labels.push_back(row.empty() ? std::string("-") : "layers " + row.front().layers.label());
    }
    sheet.image = compose_contact_sheet(panels, sheet.row_labels, sheet.column_labels);
    return sheet;
}

std::string contact_sheet_name(std::string_view question_id, std::string_view model_id,
                               const core::LayerRange &layers) {
    return std::string(question_id) + "_" + std::string(model_id) + "_" + layers.label() + ".png";
}

} // namespace agcam::render
