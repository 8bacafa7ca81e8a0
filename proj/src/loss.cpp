#include "bal/loss.hpp"

#include <algorithm>
#include <cmath>

#include "bal/error.hpp"

namespace bal {

double clamp_prob(double p) {
    return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

double safe_log(double p) { return std::log(clamp_prob(p)); }

Tensor2 softmax_rows(const Tensor2& logits) {
    Tensor2 out(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const auto in = logits.row(i);
        auto o = out.row(i);
        const double mx = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < in.size(); ++j) o[j] /= sum;
    }
    return out;
}

XentResult softmax_xent(const Tensor2& logits, std::span<const int> labels) {
    if (labels.size() != logits.rows)
        fail_shape("softmax_xent: label count != batch size");
    const int classes = static_cast<int>(logits.cols);
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] < 0 || labels[i] >= classes)
            fail_data("softmax_xent: label " + std::to_string(labels[i]) +
                      " out of range [0, " + std::to_string(classes) + ")");

    XentResult res;
    res.grad = Tensor2(logits.rows, logits.cols);
    const double inv_batch = 1.0 / static_cast<double>(logits.rows);
    double total = 0.0;
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const auto in = logits.row(i);
        auto g = res.grad.row(i);
        const double mx = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t j = 0; j < in.size(); ++j) sum += std::exp(in[j] - mx);
        const double log_sum = std::log(sum) + mx;
        total += log_sum - in[static_cast<std::size_t>(labels[i])];
        for (std::size_t j = 0; j < in.size(); ++j) {
            const double p = std::exp(in[j] - log_sum);
            g[j] = (p - (static_cast<int>(j) == labels[i] ? 1.0 : 0.0)) * inv_batch;
        }
    }
    res.loss = total * inv_batch;
    if (!std::isfinite(res.loss)) fail_numeric("softmax_xent: non-finite loss");
    return res;
}

} // namespace bal
