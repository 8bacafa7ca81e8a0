#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bal/rng.hpp"
#include "bal/tensor.hpp"

namespace bal {

// Per-dimension bounding box [lower, upper] of one feature batch.
struct BatchBounds {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t dim() const { return lower.size(); }
};

// Componentwise min/max over the rows of a non-empty batch.
BatchBounds batch_bounds(const Tensor2& features);

enum class NegOrigin : std::uint8_t {
    trivial_uniform,
    hard_fgsm_feature,
    hard_fgsm_noise,
    shuffled,
};

// Synthetic OOD feature with the label it is conditioned on. The origin
// decides which loss the pair feeds.
struct NegativePair {
    std::vector<double> feature;
    int label = 0;
    NegOrigin origin = NegOrigin::trivial_uniform;
};

// k draws uniform inside the (optionally margin-expanded) box, labels uniform
// over [0, class_count).
std::vector<NegativePair> sample_uniform(const BatchBounds& bounds, std::size_t k,
                                         int class_count, Rng& rng, double margin = 0.0);

// Per element, a uniform draw from the class_count-1 labels different from the
// original. class_count must be at least 2.
std::vector<int> shuffle_labels(std::span<const int> labels, int class_count, Rng& rng);

} // namespace bal
