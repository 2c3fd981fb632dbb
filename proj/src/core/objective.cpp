#include "agcam/core/objective.hpp"

#include "agcam/error.hpp"

namespace agcam::core {

double scalar_objective(const Matrix &logits) {
    if (logits.cols() == 0) {
        throw Error(ErrorCode::kShapeMismatch, "logits need at least one vocabulary column");
    }
    double y = 0.0;
    for (Eigen::Index s = 0; s < logits.rows(); ++s) {
        double row_max = logits(s, 0);
        for (Eigen::Index v = 1; v < logits.cols(); ++v) {
            if (logits(s, v) > row_max) row_max = logits(s, v);
        }
        y += row_max;
    }
    return y;
}

} // namespace agcam::core
