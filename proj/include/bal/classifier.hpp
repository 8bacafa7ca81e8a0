#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bal/data.hpp"
#include "bal/net.hpp"

namespace bal {

struct ClassifierArch {
    std::vector<std::size_t> hidden;      // widths between input and the feature layer
    std::size_t feature_dim = 64;         // m, width of the penultimate layer
    Activation activation = Activation::relu;
};

struct ClassifierMeta {
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    std::size_t epochs = 0;
    double lr = 0.0;
    std::uint64_t seed = 0;
};

// Trained classification net, split as backbone (input -> m, post-activation
// features) and linear head (m -> C). Frozen on construction: there is no way
// to mutate parameters through the public surface.
class Classifier {
public:
    const DenseNet& backbone() const { return backbone_; }
    const DenseNet& head() const { return head_; }
    std::size_t feature_dim() const { return backbone_.output_width(); }
    int class_count() const { return static_cast<int>(head_.output_width()); }
    const ClassifierMeta& meta() const { return meta_; }

    // Writes <stem>.backbone.balnet, <stem>.head.balnet and a key=value
    // sidecar <stem>.meta.
    void save(const std::string& stem) const;
    static Classifier load(const std::string& stem);

    static Classifier from_parts(DenseNet backbone, DenseNet head, ClassifierMeta meta);

private:
    Classifier(DenseNet backbone, DenseNet head, ClassifierMeta meta);

    DenseNet backbone_;
    DenseNet head_;
    ClassifierMeta meta_;
};

// Adam + cross-entropy minibatch training; the returned classifier is frozen.
// test may be null (test_accuracy is then reported as 0).
Classifier train_classifier(const LabeledDataset& train, const LabeledDataset* test,
                            const ClassifierArch& arch, std::size_t epochs, double lr,
                            std::size_t batch_size, std::uint64_t seed);

// Penultimate-layer features with labels carried through.
FeatureBank extract_features(const Classifier& cls, const LabeledDataset& data);
Tensor2 extract_feature_matrix(const Classifier& cls, const Tensor2& inputs);

struct Prediction {
    std::vector<int> labels;  // argmax class
    std::vector<double> p1;   // max softmax probability
};

Prediction predict(const Classifier& cls, const Tensor2& inputs);
Tensor2 classifier_logits(const Classifier& cls, const Tensor2& inputs);
double accuracy(const Classifier& cls, const LabeledDataset& data);

} // namespace bal
