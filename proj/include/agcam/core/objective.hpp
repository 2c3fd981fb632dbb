#pragma once

#include "agcam/adapter/attention_trace.hpp"

namespace agcam::core {

// y = sum over positions of the row-wise maximum logit. Rows are reduced left
// to right and summed in position order.
double scalar_objective(const Matrix &logits);

} // namespace agcam::core
