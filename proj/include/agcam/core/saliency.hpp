#pragma once

#include "agcam/adapter/model_handle.hpp"

#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace agcam::core {

enum class AggregationMode { kSum, kRollout };

std::string_view to_string(AggregationMode mode);
AggregationMode aggregation_from_string(std::string_view name);

// Inclusive, 1-based range of language-model layers.
struct LayerRange {
    int start = 1;
    int end = 1;

    // Throws EmptyRange unless 1 <= start <= end <= num_layers.
    void validate(int num_layers) const;
    std::string label() const; // "A-B"
    bool operator==(const LayerRange &) const = default;
};

struct TokenSelector {
    enum class Kind { kAllQueryTokens, kIndex, kRole };

    Kind kind = Kind::kAllQueryTokens;
    int index = 0;
    SpecialRole role = SpecialRole::kBos;

    static TokenSelector all_query_tokens() { return {}; }
    static TokenSelector at(int q) { return {Kind::kIndex, q, SpecialRole::kBos}; }
    static TokenSelector of_role(SpecialRole r) { return {Kind::kRole, 0, r}; }

    // "all", an integer index, "bos" or "separator".
    static TokenSelector parse(std::string_view text);
    std::string to_string() const;
};

// Resolves the selector against a layout. Throws InvalidTokenSelector when the
// target is not a query or special position.
std::vector<int> resolve_tokens(const TokenSelector &selector, const TokenLayout &layout);

struct SaliencyRequest {
    TokenSelector tokens;
    LayerRange layers;
    AggregationMode aggregation = AggregationMode::kSum;
    NormMode norm = NormMode::kSoftmax;
};

// Row-major grid of heat values.
struct HeatGrid {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
    double &at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
    bool operator==(const HeatGrid &) const = default;
};

struct Provenance {
    std::string model_id;
    std::string prompt;
    std::string prompt_id; // question id, or a hash of the prompt
    double objective = 0.0;
    std::string timestamp; // ISO-8601 UTC
};

struct SaliencyResult {
    int token_index = 0;
    std::string token_text;
    LayerRange layers;
    AggregationMode aggregation = AggregationMode::kSum;
    NormMode norm = NormMode::kSoftmax;
    std::vector<double> raw_heat;   // length S, >= 0
    std::vector<double> image_heat; // length S_I
    HeatGrid normalized_grid;       // values in [0, 1]
    Provenance provenance;
};

// Per-layer, per-token map: sum_h F[k][h][q][.] * ReLU(grad[k][h][q][.]).
// Reads only row q of layer k. Throws IndexOutOfRange.
std::vector<double> layer_token_saliency(const AttentionTrace &trace, int layer, int token);

// Full gradient-weighted matrix sum_h F[k][h] (.) ReLU(grad[k][h]) of one layer.
Matrix layer_saliency_matrix(const AttentionTrace &trace, int layer);

// Elementwise sum, accumulated in list order. Throws EmptyRange / ShapeMismatch.
std::vector<double> aggregate_layers(std::span<const std::vector<double>> per_layer_maps);

// Rollout: M_k = row_normalize(I + W_k), M = M_end ... M_start, returns row
// `token` of M. `layer_matrices` is ordered start..end.
std::vector<double> rollout_layers(std::span<const Matrix> layer_matrices, int token);

// Entries at layout.image_span, in order. Throws ShapeMismatch.
std::vector<double> extract_image_heat(std::span<const double> heat, const TokenLayout &layout);

// Min-max to [0, 1]; constant input maps to all zeros. Throws NegativeInput.
std::vector<double> normalize_heat(std::span<const double> heat);

// Everything after capture: per-layer maps through the normalized grid.
std::vector<SaliencyResult> saliency_from_trace(const AttentionTrace &trace, const SaliencyRequest &request,
                                                const std::string &prompt,
                                                const std::optional<std::string> &question_id = std::nullopt);

// encode -> capture -> per-layer maps -> aggregate -> image part -> normalize -> grid.
std::vector<SaliencyResult> compute_saliency(ModelHandle &handle, const Image &image, std::string_view question,
                                             const SaliencyRequest &request,
                                             const std::optional<std::string> &question_id = std::nullopt);

// Short stable hash of a prompt, used as prompt_id when no question id exists.
std::string prompt_hash(std::string_view prompt);

inline constexpr int kExportSchemaVersion = 1;

// Export document shared by the renderer sidecars, the service and the UI.
nlohmann::json to_export_json(const SaliencyResult &result);
// Inverse of to_export_json for the fields the export carries.
SaliencyResult from_export_json(const nlohmann::json &doc);

} // namespace agcam::core
