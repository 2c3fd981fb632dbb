#include "agcam/micro/oracle.hpp"

#include "agcam/error.hpp"
#include "agcam/micro/micro_model.hpp"

namespace agcam::oracle {

namespace {

micro::MicroModel &as_micro(ModelHandle &handle) {
    auto *model = dynamic_cast<micro::MicroModel *>(&handle);
    if (model == nullptr) {
        throw Error(ErrorCode::kReentryUnsupported, handle.descriptor().model_id + " cannot be re-entered mid-graph");
    }
    return *model;
}

} // namespace

std::vector<double> finite_difference_grad(ModelHandle &handle, const FusedInputs &inputs, int layer, int head,
                                           std::span<const std::pair<int, int>> entries, double epsilon,
                                           NormMode norm_mode) {
    auto &model = as_micro(handle);
    if (!(epsilon > 0.0)) {
        throw Error(ErrorCode::kPreconditionViolation, "epsilon must be positive", "epsilon");
    }
    const AttentionTrace base = handle.forward_backward_capture(inputs, norm_mode);
    const Matrix &feature_map = base.feature_map(layer, head);

    std::vector<double> out;
    out.reserve(entries.size());
    for (const auto &[i, j] : entries) {
        if (i < 0 || j < 0 || i >= feature_map.rows() || j >= feature_map.cols()) {
            throw Error(ErrorCode::kIndexOutOfRange, "finite-difference entry outside the feature map");
        }
        Matrix plus = feature_map;
        Matrix minus = feature_map;
        plus(i, j) += epsilon;
        minus(i, j) -= epsilon;
        const double y_plus = model.objective_with_feature_override(inputs, norm_mode, layer, head, plus);
        const double y_minus = model.objective_with_feature_override(inputs, norm_mode, layer, head, minus);
        out.push_back((y_plus - y_minus) / (2.0 * epsilon));
    }
    return out;
}

std::vector<double> brute_force_agcam(const AttentionTrace &trace, int q, int layer_start, int layer_end) {
    const int s = trace.layout.total_len;
    if (q < 0 || q >= s) throw Error(ErrorCode::kIndexOutOfRange, "token index out of range");
    if (layer_start < 1 || layer_start > layer_end || layer_end > trace.num_layers()) {
        throw Error(ErrorCode::kEmptyRange, "invalid layer range");
    }
    std::vector<double> out(static_cast<std::size_t>(s), 0.0);
    for (int k = layer_start; k <= layer_end; ++k) {
        for (int h = 0; h < trace.num_heads(); ++h) {
            const auto &f = trace.feature_maps[k - 1][h];
            const auto &g = trace.gradients[k - 1][h];
            for (int j = 0; j < s; ++j) {
                double gate = g(q, j);
                if (gate < 0.0) gate = 0.0;
                out[j] += f(q, j) * gate;
            }
        }
    }
    return out;
}

std::vector<double> brute_force_agcam(ModelHandle &handle, const FusedInputs &inputs, int q, int layer_start,
                                      int layer_end, NormMode norm_mode) {
    as_micro(handle);
    return brute_force_agcam(handle.forward_backward_capture(inputs, norm_mode), q, layer_start, layer_end);
}

} // namespace agcam::oracle
