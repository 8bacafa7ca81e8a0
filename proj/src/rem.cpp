#include "bal/rem.hpp"

#include <algorithm>

#include "bal/error.hpp"

namespace bal {

BatchBounds batch_bounds(const Tensor2& features) {
    if (features.rows == 0) fail_data("batch_bounds: empty batch");
    BatchBounds b;
    b.lower.assign(features.row(0).begin(), features.row(0).end());
    b.upper = b.lower;
    for (std::size_t i = 1; i < features.rows; ++i) {
        const auto row = features.row(i);
        for (std::size_t j = 0; j < features.cols; ++j) {
            b.lower[j] = std::min(b.lower[j], row[j]);
            b.upper[j] = std::max(b.upper[j], row[j]);
        }
    }
    return b;
}

std::vector<NegativePair> sample_uniform(const BatchBounds& bounds, std::size_t k,
                                         int class_count, Rng& rng, double margin) {
    if (bounds.dim() == 0) fail_data("sample_uniform: empty bounds");
    if (class_count < 1) fail_config("sample_uniform: class_count must be positive");
    std::vector<double> lo(bounds.lower), hi(bounds.upper);
    if (margin != 0.0) {
        for (std::size_t j = 0; j < lo.size(); ++j) {
            const double range = hi[j] - lo[j];
            lo[j] -= margin * range;
            hi[j] += margin * range;
        }
    }
    std::vector<NegativePair> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        NegativePair pair;
        pair.origin = NegOrigin::trivial_uniform;
        pair.feature.resize(lo.size());
        for (std::size_t j = 0; j < lo.size(); ++j)
            pair.feature[j] = lo[j] == hi[j] ? lo[j] : rng.uniform(lo[j], hi[j]);
        pair.label = rng.uniform_int(class_count);
        out.push_back(std::move(pair));
    }
    return out;
}

std::vector<int> shuffle_labels(std::span<const int> labels, int class_count, Rng& rng) {
    if (class_count < 2)
        fail_config("shuffle_labels: need at least 2 classes for mismatched labels");
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int c = labels[i];
        if (c < 0 || c >= class_count) fail_data("shuffle_labels: label out of range");
        const int draw = rng.uniform_int(class_count - 1);
        out[i] = draw >= c ? draw + 1 : draw;
    }
    return out;
}

} // namespace bal
