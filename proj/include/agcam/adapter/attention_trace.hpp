#pragma once

#include "agcam/adapter/descriptor.hpp"
#include "agcam/adapter/token_layout.hpp"

#include <Eigen/Core>
#include <string_view>
#include <vector>

namespace agcam {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class NormMode { kSoftmax, kSigmoid };

std::string_view to_string(NormMode mode);
NormMode norm_mode_from_string(std::string_view name);

// Everything captured by one teacher-forced forward/backward pass. Per-layer
// containers are indexed [layer - 1][head]; layers are 1-based in the API.
struct AttentionTrace {
    ModelDescriptor descriptor;
    TokenLayout layout;
    NormMode norm_mode = NormMode::kSoftmax;
    std::vector<std::vector<Matrix>> feature_maps;
    std::vector<std::vector<Matrix>> raw_scores;
    std::vector<std::vector<Matrix>> gradients;
    Matrix logits;
    double objective = 0.0;

    int num_layers() const { return static_cast<int>(feature_maps.size()); }
    int num_heads() const { return feature_maps.empty() ? 0 : static_cast<int>(feature_maps.front().size()); }
    int seq_len() const { return layout.total_len; }

    const Matrix &feature_map(int layer, int head) const;
    const Matrix &gradient(int layer, int head) const;
    Matrix &feature_map(int layer, int head);
    Matrix &gradient(int layer, int head);

    // Checks shapes, softmax row sums (1e-5), sigmoid open interval and gradient
    // finiteness. Throws ShapeMismatch, PreconditionViolation or NonFiniteGradient.
    void validate() const;
};

} // namespace agcam
