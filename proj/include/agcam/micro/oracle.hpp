#pragma once

// Reference computations used to check the saliency pipeline and the captured
// gradients. Nothing here calls into agcam::core saliency code.

#include "agcam/adapter/model_handle.hpp"

#include <span>
#include <utility>
#include <vector>

namespace agcam::oracle {

// Central differences (y(F + eps e_ij) - y(F - eps e_ij)) / 2 eps for each
// (i, j), re-entering the micro-model at `layer` with the perturbed feature
// map. Throws ReentryUnsupported for non-micro handles and
// PreconditionViolation for eps <= 0.
std::vector<double> finite_difference_grad(ModelHandle &handle, const FusedInputs &inputs, int layer, int head,
                                           std::span<const std::pair<int, int>> entries, double epsilon = 1e-3,
                                           NormMode norm_mode = NormMode::kSoftmax);

// Explicit-loop transcription of the per-token saliency:
//   out[j] = sum_{k=start..end} sum_h F[k][h][q][j] * max(grad[k][h][q][j], 0)
std::vector<double> brute_force_agcam(const AttentionTrace &trace, int q, int layer_start, int layer_end);

// Captures a fresh trace on a micro-model handle, then applies the overload above.
std::vector<double> brute_force_agcam(ModelHandle &handle, const FusedInputs &inputs, int q, int layer_start,
                                      int layer_end, NormMode norm_mode);

} // namespace agcam::oracle
