#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bal/classifier.hpp"
#include "bal/net.hpp"

namespace bal {

enum class DetectorId { bal, max_softmax, odin };
const char* detector_name(DetectorId id);

struct ScoredSample {
    std::size_t index = 0;
    DetectorId detector = DetectorId::bal;
    int predicted = 0;
    double p1 = 0.0;                // classifier confidence (max softmax)
    std::optional<double> p2;       // discriminator score, BAL only
    double score = 0.0;             // p1*p2 for BAL, native score otherwise
    bool is_id = false;             // ground truth
};

struct DetectionConfig {
    double gamma = 0.60;          // accept/reject threshold
    double odin_temperature = 10.0;
    double odin_epsilon = 5e-4;
};

// Named ODIN settings: cifar10 (10, 2e-3), cifar100 (100, 5e-4), svhn (10, 5e-4).
DetectionConfig odin_preset(const std::string& name);

// S = p1 * D(h(x); argmax class).
std::vector<ScoredSample> score_bal(const Classifier& cls, const DenseNet& d_net,
                                    const Tensor2& inputs, bool is_id);

// S = p1.
std::vector<ScoredSample> score_max_softmax(const Classifier& cls, const Tensor2& inputs,
                                            bool is_id);

// One gradient-sign input-preprocessing step that increases the temperature-
// scaled max log-probability, then S = max softmax(logits(x~)/T).
std::vector<ScoredSample> score_odin(const Classifier& cls, const Tensor2& inputs,
                                     double temperature, double epsilon, bool is_id);

struct ThresholdDecision {
    bool accept = false; // accept as ID (reject means OOD)
    int label = 0;       // predicted class, meaningful when accepted
};

// Reject iff score < gamma (ties accept).
std::vector<ThresholdDecision> classify_with_threshold(std::span<const ScoredSample> scored,
                                                       double gamma);

// CSV columns: sample_index, detector_id, predicted_class, p1, p2, score, is_id.
void write_scores_csv(std::span<const ScoredSample> scored, const std::string& path);

std::vector<double> scores_of(std::span<const ScoredSample> scored);

} // namespace bal
