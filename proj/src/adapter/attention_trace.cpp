#include "agcam/adapter/attention_trace.hpp"

#include "agcam/error.hpp"

#include <cmath>
#include <string>

namespace agcam {

std::string_view to_string(NormMode mode) {
    return mode == NormMode::kSoftmax ? "softmax" : "sigmoid";
}

NormMode norm_mode_from_string(std::string_view name) {
    if (name == "softmax") return NormMode::kSoftmax;
    if (name == "sigmoid") return NormMode::kSigmoid;
    throw Error(ErrorCode::kPreconditionViolation, "norm must be softmax or sigmoid", "norm");
}

namespace {

void check_layer_head(const AttentionTrace &t, int layer, int head) {
    if (layer < 1 || layer > t.num_layers() || head < 0 || head >= t.num_heads()) {
        throw Error(ErrorCode::kIndexOutOfRange,
                    "layer " + std::to_string(layer) + " head " + std::to_string(head) + " not in trace");
    }
}

} // namespace

const Matrix &AttentionTrace::feature_map(int layer, int head) const {
    check_layer_head(*this, layer, head);
    return feature_maps[layer - 1][head];
}

const Matrix &AttentionTrace::gradient(int layer, int head) const {
    check_layer_head(*this, layer, head);
    return gradients[layer - 1][head];
}

Matrix &AttentionTrace::feature_map(int layer, int head) {
    check_layer_head(*this, layer, head);
    return feature_maps[layer - 1][head];
}

Matrix &AttentionTrace::gradient(int layer, int head) {
    check_layer_head(*this, layer, head);
    return gradients[layer - 1][head];
}

void AttentionTrace::validate() const {
    layout.validate();
    const int s = layout.total_len;
    const auto layers = static_cast<std::size_t>(descriptor.num_layers);
    if (feature_maps.size() != layers || raw_scores.size() != layers || gradients.size() != layers) {
        throw Error(ErrorCode::kShapeMismatch, "trace layer count differs from descriptor");
    }
    if (logits.rows() != s || logits.cols() != descriptor.vocab_size) {
        throw Error(ErrorCode::kShapeMismatch, "logits must be S x v");
    }
    for (std::size_t k = 0; k < layers; ++k) {
        const auto heads = static_cast<std::size_t>(descriptor.num_heads);
        if (feature_maps[k].size() != heads || raw_scores[k].size() != heads || gradients[k].size() != heads) {
            throw Error(ErrorCode::kShapeMismatch, "trace head count differs from descriptor");
        }
        for (std::size_t h = 0; h < heads; ++h) {
            for (const Matrix *m : {&feature_maps[k][h], &raw_scores[k][h], &gradients[k][h]}) {
                if (m->rows() != s || m->cols() != s) {
                    throw Error(ErrorCode::kShapeMismatch, "attention matrices must be S x S");
                }
            }
            if (!gradients[k][h].allFinite()) {
                throw Error(ErrorCode::kNonFiniteGradient,
                            "layer " + std::to_string(k + 1) + " head " + std::to_string(h));
            }
            const Matrix &f = feature_maps[k][h];
            if (norm_mode == NormMode::kSoftmax) {
                for (int i = 0; i < s; ++i) {
                    if (std::abs(f.row(i).sum() - 1.0) > 1e-5) {
                        throw Error(ErrorCode::kPreconditionViolation, "softmax row does not sum to 1");
                    }
                }
            } else if ((f.array() <= 0.0).any() || (f.array() >= 1.0).any()) {
                throw Error(ErrorCode::kPreconditionViolation, "sigmoid feature map outside (0, 1)");
            }
        }
    }
}

} // namespace agcam
