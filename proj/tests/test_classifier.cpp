#include <algorithm>
#include <cmath>
#include <filesystem>

#include "bal/classifier.hpp"
#include "bal/error.hpp"
#include "bal/loss.hpp"
#include "bal/rng.hpp"
#include "doctest.h"

using namespace bal;

namespace {

ClassifierArch toy_arch() {
    ClassifierArch arch;
    arch.hidden = {16};
    arch.feature_dim = 2;
    return arch;
}

} // namespace

TEST_CASE("well-separated two-gaussian toy trains to >= 0.99 accuracy") {
    // means 6 sigma apart: Bayes error is negligible
    const LabeledDataset train = gen_two_gaussians(400, {-3, 0}, {3, 0}, 1.0, 1);
    const LabeledDataset test = gen_two_gaussians(400, {-3, 0}, {3, 0}, 1.0, 2);
    const Classifier cls = train_classifier(train, &test, toy_arch(), 40, 1e-2, 64, 7);
    CHECK(cls.meta().test_accuracy >= 0.99);
    CHECK(cls.meta().train_accuracy >= 0.99);
}

TEST_CASE("zero-epoch training sits at chance accuracy") {
    // random 10-class data: an untrained net predicts independently of labels
    Rng rng(55);
    LabeledDataset ds;
    ds.class_count = 10;
    ds.inputs = Tensor2(2000, 20);
    for (double& v : ds.inputs.data) v = rng.uniform01();
    ds.labels.resize(2000);
    for (int& l : ds.labels) l = rng.uniform_int(10);

    ClassifierArch arch;
    arch.hidden = {32};
    arch.feature_dim = 16;
    const Classifier cls = train_classifier(ds, &ds, arch, 0, 1e-3, 128, 3);
    CHECK(std::abs(cls.meta().test_accuracy - 0.1) <= 0.05);
}

TEST_CASE("extract_features: dimension, decomposition and repeatability") {
    const LabeledDataset train = gen_two_gaussians(200, {-3, 0}, {3, 0}, 0.5, 10);
    const Classifier cls = train_classifier(train, nullptr, toy_arch(), 10, 1e-2, 64, 11);

    const FeatureBank bank = extract_features(cls, train);
    CHECK(bank.dim() == 2);
    CHECK(bank.size() == train.size());
    CHECK(bank.labels == train.labels);

    // head(backbone(x)) equals the full forward logits
    const Tensor2 via_parts = forward(cls.head(), bank.features);
    const Tensor2 direct = classifier_logits(cls, train.inputs);
    for (std::size_t i = 0; i < direct.data.size(); ++i)
        CHECK(std::abs(via_parts.data[i] - direct.data[i]) <= 1e-12);

    const FeatureBank again = extract_features(cls, train);
    CHECK(again.features.data == bank.features.data);
}

TEST_CASE("predict: uniform logits give p1 = 1/C") {
    DenseNet backbone;
    backbone.layers.push_back({Tensor2(3, 2), {0.0, 0.0}, Activation::identity});
    DenseNet head;
    head.layers.push_back({Tensor2(2, 5), std::vector<double>(5, 0.0), Activation::identity});
    const Classifier cls = Classifier::from_parts(backbone, head, {});
    Tensor2 x(4, 3);
    Rng rng(2);
    for (double& v : x.data) v = rng.normal();
    const Prediction pred = predict(cls, x);
    for (double p : pred.p1) CHECK(p == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("predict: p1 stays in [1/C, 1] and matches a brute-force oracle") {
    const std::size_t widths[] = {4, 8, 3};
    const std::vector<Activation> acts = {Activation::relu, Activation::identity};
    DenseNet backbone = make_dense_net(std::span(widths).subspan(0, 2),
                                       std::span(acts).subspan(0, 1), 5);
    const std::size_t head_widths[] = {8, 3};
    DenseNet head = make_dense_net(head_widths, std::span(acts).subspan(1, 1), 6);
    const Classifier cls = Classifier::from_parts(backbone, head, {});

    Rng rng(77);
    Tensor2 x(50, 4);
    for (double& v : x.data) v = rng.normal(0.0, 2.0);
    const Prediction pred = predict(cls, x);
    const Tensor2 logits = classifier_logits(cls, x);
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(pred.p1[i] >= 1.0 / 3.0 - 1e-12);
        CHECK(pred.p1[i] <= 1.0);
        // brute force: softmax then argmax
        double mx = -1e300, sum = 0.0;
        for (double v : logits.row(i)) mx = std::max(mx, v);
        std::vector<double> probs;
        for (double v : logits.row(i)) probs.push_back(std::exp(v - mx));
        for (double p : probs) sum += p;
        std::size_t arg = 0;
        for (std::size_t j = 1; j < probs.size(); ++j)
            if (probs[j] > probs[arg]) arg = j;
        CHECK(pred.labels[i] == static_cast<int>(arg));
        CHECK(pred.p1[i] == doctest::Approx(probs[arg] / sum).epsilon(1e-12));
    }
}

TEST_CASE("predict: p1 is invariant to a constant logit shift") {
    const std::size_t bw[] = {2, 4};
    const Activation ba[] = {Activation::tanh};
    DenseNet backbone = make_dense_net(bw, ba, 8);
    const std::size_t hw[] = {4, 3};
    const Activation ha[] = {Activation::identity};
    DenseNet head = make_dense_net(hw, ha, 9);
    const Classifier cls = Classifier::from_parts(backbone, head, {});

    DenseNet shifted_head = cls.head();
    for (double& b : shifted_head.layers[0].bias) b += 13.5;
    const Classifier shifted = Classifier::from_parts(cls.backbone(), shifted_head, {});

    Rng rng(10);
    Tensor2 x(20, 2);
    for (double& v : x.data) v = rng.normal();
    const Prediction a = predict(cls, x);
    const Prediction b = predict(shifted, x);
    for (std::size_t i = 0; i < 20; ++i) {
        CHECK(a.labels[i] == b.labels[i]);
        CHECK(a.p1[i] == doctest::Approx(b.p1[i]).epsilon(1e-12));
    }
}

TEST_CASE("classifier checkpoint round trip preserves bytes and metadata") {
    const LabeledDataset train = gen_two_gaussians(100, {-3, 0}, {3, 0}, 0.5, 20);
    const Classifier cls = train_classifier(train, &train, toy_arch(), 5, 1e-2, 32, 21);
    const auto stem = (std::filesystem::temp_directory_path() / "bal_test_cls").string();
    cls.save(stem);
    const Classifier loaded = Classifier::load(stem);
    CHECK(serialize_net(loaded.backbone()) == serialize_net(cls.backbone()));
    CHECK(serialize_net(loaded.head()) == serialize_net(cls.head()));
    CHECK(loaded.meta().test_accuracy == cls.meta().test_accuracy);
    CHECK(loaded.meta().seed == cls.meta().seed);
    for (const char* suffix : {".backbone.balnet", ".head.balnet", ".meta"})
        std::filesystem::remove(stem + suffix);
}

TEST_CASE("training is deterministic under the seed") {
    const LabeledDataset train = gen_two_gaussians(150, {-2, 0}, {2, 0}, 0.6, 30);
    const Classifier a = train_classifier(train, nullptr, toy_arch(), 8, 1e-2, 32, 31);
    const Classifier b = train_classifier(train, nullptr, toy_arch(), 8, 1e-2, 32, 31);
    CHECK(serialize_net(a.backbone()) == serialize_net(b.backbone()));
    CHECK(serialize_net(a.head()) == serialize_net(b.head()));
}

TEST_CASE("empty dataset raises a data error") {
    LabeledDataset empty;
    empty.class_count = 2;
    CHECK_THROWS_AS((void)train_classifier(empty, nullptr, toy_arch(), 1, 1e-3, 32, 1),
                    Error);
}
