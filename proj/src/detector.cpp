#include "bal/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "bal/error.hpp"
#include "bal/loss.hpp"
#include "bal/rdm.hpp"
#include "bal/rsm.hpp"

namespace bal {

const char* detector_name(DetectorId id) {
    switch (id) {
    case DetectorId::bal:         return "bal";
    case DetectorId::max_softmax: return "max-softmax";
    case DetectorId::odin:        return "odin";
    }
    return "?";
}

DetectionConfig odin_preset(const std::string& name) {
    DetectionConfig cfg;
    if (name == "cifar10") {
        cfg.odin_temperature = 10.0;
        cfg.odin_epsilon = 2e-3;
    } else if (name == "cifar100") {
        cfg.odin_temperature = 100.0;
        cfg.odin_epsilon = 5e-4;
    } else if (name == "svhn") {
        cfg.odin_temperature = 10.0;
        cfg.odin_epsilon = 5e-4;
    } else {
        fail_config("unknown ODIN preset: " + name);
    }
    return cfg;
}

std::vector<ScoredSample> score_max_softmax(const Classifier& cls, const Tensor2& inputs,
                                            bool is_id) {
    const Prediction pred = predict(cls, inputs);
    std::vector<ScoredSample> out(inputs.rows);
    for (std::size_t i = 0; i < inputs.rows; ++i) {
        out[i].index = i;
        out[i].detector = DetectorId::max_softmax;
        out[i].predicted = pred.labels[i];
        out[i].p1 = pred.p1[i];
        out[i].score = pred.p1[i];
        out[i].is_id = is_id;
    }
    return out;
}

std::vector<ScoredSample> score_bal(const Classifier& cls, const DenseNet& d_net,
                                    const Tensor2& inputs, bool is_id) {
    const Tensor2 features = extract_feature_matrix(cls, inputs);
    const Tensor2 probs = softmax_rows(forward(cls.head(), features));
    std::vector<int> predicted(inputs.rows);
    std::vector<double> p1(inputs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const auto row = probs.row(i);
        const auto it = std::max_element(row.begin(), row.end());
        predicted[i] = static_cast<int>(it - row.begin());
        p1[i] = *it;
    }
    const std::vector<double> p2 =
        d_eval_batch(d_net, features, predicted, cls.class_count());

    std::vector<ScoredSample> out(inputs.rows);
    for (std::size_t i = 0; i < inputs.rows; ++i) {
        out[i].index = i;
        out[i].detector = DetectorId::bal;
        out[i].predicted = predicted[i];
        out[i].p1 = p1[i];
        out[i].p2 = p2[i];
        out[i].score = p1[i] * p2[i];
        out[i].is_id = is_id;
    }
    return out;
}

std::vector<ScoredSample> score_odin(const Classifier& cls, const Tensor2& inputs,
                                     double temperature, double epsilon, bool is_id) {
    if (!(temperature > 0.0)) fail_config("score_odin: temperature must be positive");

    Tensor2 perturbed = inputs;
    if (epsilon != 0.0) {
        // gradient of log max-softmax(logits/T) w.r.t. the input, taken at the
        // predicted class; step in the direction that increases the score
        const ForwardTrace bt = forward_traced(cls.backbone(), inputs);
        const ForwardTrace ht = forward_traced(cls.head(), bt.output);
        Tensor2 scaled = ht.output;
        for (double& v : scaled.data) v /= temperature;
        const Tensor2 probs = softmax_rows(scaled);

        Tensor2 dlogits(probs.rows, probs.cols);
        for (std::size_t i = 0; i < probs.rows; ++i) {
            const auto row = probs.row(i);
            const std::size_t top =
                static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
            // d log p_top / d logit_j = (1[j==top] - p_j) / T
            for (std::size_t j = 0; j < probs.cols; ++j)
                dlogits(i, j) = ((j == top ? 1.0 : 0.0) - row[j]) / temperature;
        }
        const NetGradients hg = backward(cls.head(), ht, dlogits);
        const NetGradients bg = backward(cls.backbone(), bt, hg.dinput);
        for (std::size_t i = 0; i < perturbed.data.size(); ++i) {
            const double g = bg.dinput.data[i];
            const double sgn = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
            perturbed.data[i] += epsilon * sgn;
        }
    }

    Tensor2 logits = classifier_logits(cls, perturbed);
    for (double& v : logits.data) v /= temperature;
    const Tensor2 probs = softmax_rows(logits);

    std::vector<ScoredSample> out(inputs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const auto row = probs.row(i);
        const auto it = std::max_element(row.begin(), row.end());
        out[i].index = i;
        out[i].detector = DetectorId::odin;
        out[i].predicted = static_cast<int>(it - row.begin());
        out[i].p1 = *it;
        out[i].score = *it;
        out[i].is_id = is_id;
    }
    return out;
}

std::vector<ThresholdDecision> classify_with_threshold(std::span<const ScoredSample> scored,
                                                       double gamma) {
    if (!(gamma > 0.0) || !(gamma < 1.0))
        fail_config("classify_with_threshold: gamma must lie in (0, 1)");
    std::vector<ThresholdDecision> out(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) {
        out[i].accept = !(scored[i].score < gamma);
        out[i].label = scored[i].predicted;
    }
    return out;
}

void write_scores_csv(std::span<const ScoredSample> scored, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail_data("cannot open for write: " + path);
    f << "sample_index,detector_id,predicted_class,p1,p2,score,is_id\n";
    char buf[512];
    for (const ScoredSample& s : scored) {
        char p2buf[64] = "";
        if (s.p2) std::snprintf(p2buf, sizeof(p2buf), "%.17g", *s.p2);
        std::snprintf(buf, sizeof(buf), "%zu,%s,%d,%.17g,%s,%.17g,%d\n", s.index,
                      detector_name(s.detector), s.predicted, s.p1, p2buf, s.score,
                      s.is_id ? 1 : 0);
        f << buf;
    }
    if (!f) fail_data("write failed: " + path);
}

std::vector<double> scores_of(std::span<const ScoredSample> scored) {
    std::vector<double> s(scored.size());
    for (std::size_t i = 0; i < scored.size(); ++i) s[i] = scored[i].score;
    return s;
}

} // namespace bal
