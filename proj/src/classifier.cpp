#include "bal/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bal/error.hpp"
#include "bal/loss.hpp"
#include "bal/rng.hpp"

namespace bal {

Classifier::Classifier(DenseNet backbone, DenseNet head, ClassifierMeta meta)
    : backbone_(std::move(backbone)), head_(std::move(head)), meta_(meta) {}

Classifier Classifier::from_parts(DenseNet backbone, DenseNet head, ClassifierMeta meta) {
    if (backbone.output_width() != head.input_width())
        fail_shape("classifier: backbone/head widths do not chain");
    return Classifier(std::move(backbone), std::move(head), meta);
}

void Classifier::save(const std::string& stem) const {
    save_net(backbone_, stem + ".backbone.balnet");
    save_net(head_, stem + ".head.balnet");
    std::ofstream f(stem + ".meta", std::ios::trunc);
    if (!f) fail_data("cannot open for write: " + stem + ".meta");
    f << "feature_dim = " << feature_dim() << "\n";
    f << "class_count = " << class_count() << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", meta_.train_accuracy);
    f << "train_accuracy = " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", meta_.test_accuracy);
    f << "test_accuracy = " << buf << "\n";
    f << "epochs = " << meta_.epochs << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", meta_.lr);
    f << "lr = " << buf << "\n";
    f << "seed = " << meta_.seed << "\n";
    if (!f) fail_data("write failed: " + stem + ".meta");
}

Classifier Classifier::load(const std::string& stem) {
    DenseNet backbone = load_net(stem + ".backbone.balnet");
    DenseNet head = load_net(stem + ".head.balnet");
    ClassifierMeta meta;
    std::ifstream f(stem + ".meta");
    if (!f) fail_data("cannot open: " + stem + ".meta");
    std::string line;
    while (std::getline(f, line)) {
        std::istringstream ls(line);
        std::string key, eq;
        if (!(ls >> key >> eq) || eq != "=") continue;
        if (key == "train_accuracy") ls >> meta.train_accuracy;
        else if (key == "test_accuracy") ls >> meta.test_accuracy;
        else if (key == "epochs") ls >> meta.epochs;
        else if (key == "lr") ls >> meta.lr;
        else if (key == "seed") ls >> meta.seed;
    }
    return from_parts(std::move(backbone), std::move(head), meta);
}

namespace {

double accuracy_of(const DenseNet& backbone, const DenseNet& head,
                   const LabeledDataset& data) {
    if (data.size() == 0) return 0.0;
    std::size_t correct = 0;
    const std::size_t chunk = 1024;
    for (std::size_t start = 0; start < data.size(); start += chunk) {
        const std::size_t n = std::min(chunk, data.size() - start);
        Tensor2 x(n, data.inputs.cols);
        std::copy_n(data.inputs.data.begin() + start * data.inputs.cols,
                    n * data.inputs.cols, x.data.begin());
        const Tensor2 logits = forward(head, forward(backbone, x));
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = logits.row(i);
            const auto it = std::max_element(row.begin(), row.end());
            if (static_cast<int>(it - row.begin()) == data.labels[start + i]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

} // namespace

Classifier train_classifier(const LabeledDataset& train, const LabeledDataset* test,
                            const ClassifierArch& arch, std::size_t epochs, double lr,
                            std::size_t batch_size, std::uint64_t seed) {
    if (train.size() == 0) fail_data("train_classifier: empty dataset");
    if (batch_size == 0) fail_config("train_classifier: batch size must be positive");

    std::vector<std::size_t> widths;
    widths.push_back(train.inputs.cols);
    widths.insert(widths.end(), arch.hidden.begin(), arch.hidden.end());
    widths.push_back(arch.feature_dim);
    std::vector<Activation> acts(widths.size() - 1, arch.activation);
    DenseNet backbone = make_dense_net(widths, acts, seed);

    const std::size_t head_widths[] = {arch.feature_dim,
                                       static_cast<std::size_t>(train.class_count)};
    const Activation head_act[] = {Activation::identity};
    DenseNet head = make_dense_net(head_widths, head_act, seed + 1);

    AdamState backbone_adam = make_adam(backbone, {.lr = lr});
    AdamState head_adam = make_adam(head, {.lr = lr});
    Rng rng(seed + 2);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        // Fisher-Yates with our own rng; std::shuffle is implementation-defined.
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);

        for (std::size_t start = 0; start < train.size(); start += batch_size) {
            const std::size_t n = std::min(batch_size, train.size() - start);
            Tensor2 x(n, train.inputs.cols);
            std::vector<int> y(n);
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t src = order[start + i];
                std::copy_n(train.inputs.data.begin() + src * train.inputs.cols,
                            train.inputs.cols, x.data.begin() + i * train.inputs.cols);
                y[i] = train.labels[src];
            }
            ForwardTrace bt = forward_traced(backbone, x);
            ForwardTrace ht = forward_traced(head, bt.output);
            XentResult xent = softmax_xent(ht.output, y);
            if (!std::isfinite(xent.loss))
                fail_numeric("train_classifier: loss diverged at epoch " +
                             std::to_string(epoch));
            NetGradients hg = backward(head, ht, xent.grad);
            NetGradients bg = backward(backbone, bt, hg.dinput);
            adam_step(head, hg, head_adam);
            adam_step(backbone, bg, backbone_adam);
        }
    }

    ClassifierMeta meta;
    meta.epochs = epochs;
    meta.lr = lr;
    meta.seed = seed;
    meta.train_accuracy = accuracy_of(backbone, head, train);
    meta.test_accuracy = test ? accuracy_of(backbone, head, *test) : 0.0;
    return Classifier::from_parts(std::move(backbone), std::move(head), meta);
}

FeatureBank extract_features(const Classifier& cls, const LabeledDataset& data) {
    if (data.size() == 0) fail_data("extract_features: empty dataset");
    return make_bank(forward(cls.backbone(), data.inputs), data.labels, data.class_count);
}

Tensor2 extract_feature_matrix(const Classifier& cls, const Tensor2& inputs) {
    return forward(cls.backbone(), inputs);
}

Tensor2 classifier_logits(const Classifier& cls, const Tensor2& inputs) {
    return forward(cls.head(), forward(cls.backbone(), inputs));
}

Prediction predict(const Classifier& cls, const Tensor2& inputs) {
    const Tensor2 probs = softmax_rows(classifier_logits(cls, inputs));
    Prediction pred;
    pred.labels.resize(probs.rows);
    pred.p1.resize(probs.rows);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const auto row = probs.row(i);
        const auto it = std::max_element(row.begin(), row.end());
        pred.labels[i] = static_cast<int>(it - row.begin());
        pred.p1[i] = *it;
    }
    return pred;
}

double accuracy(const Classifier& cls, const LabeledDataset& data) {
    return accuracy_of(cls.backbone(), cls.head(), data);
}

} // namespace bal
