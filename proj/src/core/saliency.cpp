#include "agcam/core/saliency.hpp"

#include "agcam/error.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>

namespace agcam::core {

std::string_view to_string(AggregationMode mode) {
    return mode == AggregationMode::kSum ? "sum" : "rollout";
}

AggregationMode aggregation_from_string(std::string_view name) {
    if (name == "sum") return AggregationMode::kSum;
    if (name == "rollout") return AggregationMode::kRollout;
    throw Error(ErrorCode::kPreconditionViolation, "aggregation must be sum or rollout", "agg");
}

void LayerRange::validate(int num_layers) const {
    if (start < 1) throw Error(ErrorCode::kEmptyRange, "layer_start must be >= 1", "layer_start");
    if (start > end) throw Error(ErrorCode::kEmptyRange, "layer_start must not exceed layer_end", "layer_start");
    if (end > num_layers) {
        throw Error(ErrorCode::kEmptyRange, "layer_end exceeds the model's " + std::to_string(num_layers) + " layers",
                    "layer_end");
    }
}

std::string LayerRange::label() const { return std::to_string(start) + "-" + std::to_string(end); }

TokenSelector TokenSelector::parse(std::string_view text) {
    if (text == "all") return all_query_tokens();
    if (text == "bos") return of_role(SpecialRole::kBos);
    if (text == "separator") return of_role(SpecialRole::kSeparator);
    int q = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), q);
    if (ec != std::errc() || ptr != text.data() + text.size() || q < 0) {
        throw Error(ErrorCode::kInvalidTokenSelector, "token selector must be all, INDEX, bos or separator",
                    "token_selector");
    }
    return at(q);
}

std::string TokenSelector::to_string() const {
    switch (kind) {
    case Kind::kAllQueryTokens: return "all";
    case Kind::kIndex: return std::to_string(index);
    case Kind::kRole: return std::string(agcam::to_string(role));
    }
    return "all";
}

std::vector<int> resolve_tokens(const TokenSelector &selector, const TokenLayout &layout) {
    switch (selector.kind) {
    case TokenSelector::Kind::kAllQueryTokens: {
        std::vector<int> out;
        for (int q = layout.query_span.begin; q < layout.query_span.end; ++q) out.push_back(q);
        return out;
    }
    case TokenSelector::Kind::kIndex:
        if (!layout.query_span.contains(selector.index) && !layout.is_special(selector.index)) {
            throw Error(ErrorCode::kInvalidTokenSelector,
                        "position " + std::to_string(selector.index) + " is not a query or special token",
                        "token_selector");
        }
        return {selector.index};
    case TokenSelector::Kind::kRole:
        if (auto pos = layout.special_position(selector.role)) return {*pos};
        throw Error(ErrorCode::kInvalidTokenSelector,
                    "model has no " + std::string(agcam::to_string(selector.role)) + " token", "token_selector");
    }
    return {};
}

std::vector<double> layer_token_saliency(const AttentionTrace &trace, int layer, int token) {
    if (layer < 1 || layer > trace.num_layers()) {
        throw Error(ErrorCode::kIndexOutOfRange, "layer " + std::to_string(layer) + " out of range");
    }
    const int s = trace.seq_len();
    if (token < 0 || token >= s) {
        throw Error(ErrorCode::kIndexOutOfRange, "token " + std::to_string(token) + " out of range");
    }
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(s);
    for (int h = 0; h < trace.num_heads(); ++h) {
        const auto f = trace.feature_maps[layer - 1][h].row(token);
        const auto g = trace.gradients[layer - 1][h].row(token);
#ifdef AGCAM_MUTANT_FLIP_GATE
        acc += f.cwiseProduct((-g).cwiseMax(0.0));
#else
        acc += f.cwiseProduct(g.cwiseMax(0.0));
#endif
    }
    return {acc.data(), acc.data() + s};
}

Matrix layer_saliency_matrix(const AttentionTrace &trace, int layer) {
    if (layer < 1 || layer > trace.num_layers()) {
        throw Error(ErrorCode::kIndexOutOfRange, "layer " + std::to_string(layer) + " out of range");
    }
    const int s = trace.seq_len();
    Matrix acc = Matrix::Zero(s, s);
    for (int h = 0; h < trace.num_heads(); ++h) {
        acc += trace.feature_maps[layer - 1][h].cwiseProduct(trace.gradients[layer - 1][h].cwiseMax(0.0));
    }
    return acc;
}

std::vector<double> aggregate_layers(std::span<const std::vector<double>> per_layer_maps) {
    if (per_layer_maps.empty()) throw Error(ErrorCode::kEmptyRange, "no layer maps to aggregate");
    const std::size_t n = per_layer_maps.front().size();
    std::vector<double> out(n, 0.0);
    for (const auto &map : per_layer_maps) {
        if (map.size() != n) throw Error(ErrorCode::kShapeMismatch, "layer maps differ in length");
        for (std::size_t j = 0; j < n; ++j) out[j] += map[j];
    }
    return out;
}

std::vector<double> rollout_layers(std::span<const Matrix> layer_matrices, int token) {
    if (layer_matrices.empty()) throw Error(ErrorCode::kEmptyRange, "no layer matrices to roll out");
    const Eigen::Index s = layer_matrices.front().rows();
    if (token < 0 || token >= s) throw Error(ErrorCode::kIndexOutOfRange, "token out of range");
    Matrix rolled = Matrix::Identity(s, s);
    for (const Matrix &w : layer_matrices) {
        if (w.rows() != s || w.cols() != s) throw Error(ErrorCode::kShapeMismatch, "layer matrices differ in shape");
        Matrix m = Matrix::Identity(s, s) + w;
        const Eigen::VectorXd sums = m.rowwise().sum();
        for (Eigen::Index i = 0; i < s; ++i) m.row(i) /= sums[i];
        rolled = m * rolled;
    }
    const auto row = rolled.row(token);
    std::vector<double> out(row.data(), row.data() + s);
    for (double &v : out) v = std::max(v, 0.0);
    return out;
}

std::vector<double> extract_image_heat(std::span<const double> heat, const TokenLayout &layout) {
    if (static_cast<int>(heat.size()) != layout.total_len) {
        throw Error(ErrorCode::kShapeMismatch, "heat length " + std::to_string(heat.size()) +
                                                   " != sequence length " + std::to_string(layout.total_len));
    }
    return {heat.begin() + layout.image_span.begin, heat.begin() + layout.image_span.end};
}

std::vector<double> normalize_heat(std::span<const double> heat) {
    if (heat.empty()) return {};
    for (double v : heat) {
        if (!std::isfinite(v)) throw Error(ErrorCode::kNegativeInput, "heat must be finite");
        if (v < 0.0) throw Error(ErrorCode::kNegativeInput, "heat must be nonnegative");
    }
    const auto [lo_it, hi_it] = std::minmax_element(heat.begin(), heat.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<double> out(heat.size(), 0.0);
    if (hi == lo) return out;
    const double span = hi - lo;
    for (std::size_t i = 0; i < heat.size(); ++i) {
        out[i] = heat[i] == hi ? 1.0 : (heat[i] - lo) / span;
    }
    return out;
}

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

std::string prompt_hash(std::string_view prompt) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : prompt) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out = "p-";
    for (int shift = 60; shift >= 0; shift -= 4) out += kHex[(hash >> shift) & 0xf];
    return out;
}

std::vector<SaliencyResult> saliency_from_trace(const AttentionTrace &trace, const SaliencyRequest &request,
                                                const std::string &prompt,
                                                const std::optional<std::string> &question_id) {
    request.layers.validate(trace.num_layers());
    const auto &layout = trace.layout;
    const std::vector<int> tokens = resolve_tokens(request.tokens, layout);

    std::vector<Matrix> layer_matrices;
    if (request.aggregation == AggregationMode::kRollout) {
        for (int k = request.layers.start; k <= request.layers.end; ++k) {
            layer_matrices.push_back(layer_saliency_matrix(trace, k));
        }
    }

    Provenance provenance{trace.descriptor.model_id, prompt, question_id.value_or(prompt_hash(prompt)),
                          trace.objective, utc_timestamp()};

    std::vector<SaliencyResult> results;
    for (int q : tokens) {
        SaliencyResult r;
        r.token_index = q;
        r.token_text = layout.token_texts.at(q);
        r.layers = request.layers;
        r.aggregation = request.aggregation;
        r.norm = trace.norm_mode;
        if (request.aggregation == AggregationMode::kSum) {
            std::vector<std::vector<double>> maps;
            for (int k = request.layers.start; k <= request.layers.end; ++k) {
                maps.push_back(layer_token_saliency(trace, k, q));
            }
            r.raw_heat = aggregate_layers(maps);
        } else {
            r.raw_heat = rollout_layers(layer_matrices, q);
        }
        r.image_heat = extract_image_heat(r.raw_heat, layout);
        r.normalized_grid = {layout.grid_rows, layout.grid_cols, normalize_heat(r.image_heat)};
        r.provenance = provenance;
        results.push_back(std::move(r));
    }
    return results;
}

std::vector<SaliencyResult> compute_saliency(ModelHandle &handle, const Image &image, std::string_view question,
                                             const SaliencyRequest &request,
                                             const std::optional<std::string> &question_id) {
    request.layers.validate(handle.descriptor().num_layers);
    const FusedInputs inputs = handle.encode_inputs(image, question);
    // Fail on a bad selector before paying for the backward pass.
    resolve_tokens(request.tokens, inputs.layout);
    const AttentionTrace trace = handle.forward_backward_capture(inputs, request.norm);
    return saliency_from_trace(trace, request, inputs.prompt, question_id);
}

nlohmann::json to_export_json(const SaliencyResult &result) {
    return {
        {"schema_version", kExportSchemaVersion},
        {"model_id", result.provenance.model_id},
        {"prompt", result.provenance.prompt},
        {"token_index", result.token_index},
        {"token_text", result.token_text},
        {"layer_start", result.layers.start},
        {"layer_end", result.layers.end},
        {"aggregation", to_string(result.aggregation)},
        {"norm", agcam::to_string(result.norm)},
        {"grid_rows", result.normalized_grid.rows},
        {"grid_cols", result.normalized_grid.cols},
        {"heat", result.normalized_grid.values},
        {"objective_y", result.provenance.objective},
    };
}

SaliencyResult from_export_json(const nlohmann::json &doc) {
    try {
        if (doc.at("schema_version").get<int>() != kExportSchemaVersion) {
            throw Error(ErrorCode::kSchemaError, "unsupported schema_version", "schema_version");
        }
        SaliencyResult r;
        r.provenance.model_id = doc.at("model_id").get<std::string>();
        r.provenance.prompt = doc.at("prompt").get<std::string>();
        r.provenance.prompt_id = prompt_hash(r.provenance.prompt);
        r.provenance.objective = doc.at("objective_y").get<double>();
        r.token_index = doc.at("token_index").get<int>();
        r.token_text = doc.at("token_text").get<std::string>();
        r.layers = {doc.at("layer_start").get<int>(), doc.at("layer_end").get<int>()};
        r.aggregation = aggregation_from_string(doc.at("aggregation").get<std::string>());
        r.norm = norm_mode_from_string(doc.at("norm").get<std::string>());
        r.normalized_grid = {doc.at("grid_rows").get<int>(), doc.at("grid_cols").get<int>(),
                             doc.at("heat").get<std::vector<double>>()};
        if (static_cast<int>(r.normalized_grid.values.size()) != r.normalized_grid.rows * r.normalized_grid.cols) {
            throw Error(ErrorCode::kSchemaError, "heat length does not match the grid", "heat");
        }
        r.image_heat = r.normalized_grid.values;
        return r;
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorCode::kSchemaError, e.what());
    }
}

} // namespace agcam::core
