#pragma once

#include <span>

#include "bal/tensor.hpp"

namespace bal {

// Probabilities are clamped to [kProbClamp, 1-kProbClamp] before any log so
// every log term stays finite.
constexpr double kProbClamp = 1e-7;

double clamp_prob(double p);
double safe_log(double p); // log of the clamped probability

Tensor2 softmax_rows(const Tensor2& logits);

struct XentResult {
    double loss = 0.0;
    Tensor2 grad; // dLoss/dlogits, already scaled by 1/batch
};

// Mean cross-entropy over the batch; labels must lie in [0, cols).
XentResult softmax_xent(const Tensor2& logits, std::span<const int> labels);

} // namespace bal
