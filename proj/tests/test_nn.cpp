#include <cmath>
#include <filesystem>
#include <fstream>

#include "bal/error.hpp"
#include "bal/loss.hpp"
#include "bal/net.hpp"
#include "bal/rng.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bal;

namespace {

DenseNet single_layer(Tensor2 w, std::vector<double> b, Activation act) {
    DenseNet net;
    net.layers.push_back({std::move(w), std::move(b), act});
    return net;
}

DenseNet random_net(std::span<const std::size_t> widths, Activation act,
                    std::uint64_t seed) {
    std::vector<Activation> acts(widths.size() - 1, act);
    return make_dense_net(widths, acts, seed);
}

} // namespace

TEST_CASE("forward: identity single layer is the identity map") {
    Tensor2 w(2, 2);
    w(0, 0) = 1.0;
    w(1, 1) = 1.0;
    const DenseNet net = single_layer(w, {0.0, 0.0}, Activation::identity);
    Tensor2 x(1, 2);
    x(0, 0) = 1.0;
    x(0, 1) = 2.0;
    const Tensor2 y = forward(net, x);
    CHECK(y(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(y(0, 1) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("forward: zero-weight sigmoid layer outputs 0.5 everywhere") {
    const DenseNet net = single_layer(Tensor2(3, 4), std::vector<double>(4, 0.0),
                                      Activation::sigmoid);
    Rng rng(3);
    Tensor2 x(5, 3);
    for (double& v : x.data) v = rng.normal();
    const Tensor2 y = forward(net, x);
    for (double v : y.data) CHECK(v == 0.5);
}

TEST_CASE("forward: two-layer net matches the naive matmul oracle") {
    const std::size_t widths[] = {3, 4, 2};
    const DenseNet net = random_net(widths, Activation::identity, 42);
    Rng rng(7);
    Tensor2 x(6, 3);
    for (double& v : x.data) v = rng.normal();

    Tensor2 expected = oracle::naive_matmul(x, net.layers[0].weight);
    for (std::size_t i = 0; i < expected.rows; ++i)
        for (std::size_t j = 0; j < expected.cols; ++j)
            expected(i, j) += net.layers[0].bias[j];
    expected = oracle::naive_matmul(expected, net.layers[1].weight);
    for (std::size_t i = 0; i < expected.rows; ++i)
        for (std::size_t j = 0; j < expected.cols; ++j)
            expected(i, j) += net.layers[1].bias[j];

    const Tensor2 y = forward(net, x);
    for (std::size_t i = 0; i < y.data.size(); ++i)
        CHECK(std::abs(y.data[i] - expected.data[i]) <= 1e-12);
}

TEST_CASE("forward: dimension mismatch raises a shape error") {
    const std::size_t widths[] = {3, 2};
    const DenseNet net = random_net(widths, Activation::relu, 1);
    CHECK_THROWS_AS((void)forward(net, Tensor2(1, 4)), Error);
}

TEST_CASE("backward: linear net input gradient is the weight vector") {
    Tensor2 w(3, 1);
    w(0, 0) = 0.5;
    w(1, 0) = -1.5;
    w(2, 0) = 2.0;
    const DenseNet net = single_layer(w, {0.0}, Activation::identity);
    Tensor2 x(1, 3);
    x(0, 0) = 1.0;
    x(0, 1) = 2.0;
    x(0, 2) = 3.0;
    const ForwardTrace trace = forward_traced(net, x);
    Tensor2 one(1, 1);
    one(0, 0) = 1.0;
    const NetGradients g = backward(net, trace, one);
    CHECK(g.dinput(0, 0) == 0.5);
    CHECK(g.dinput(0, 1) == -1.5);
    CHECK(g.dinput(0, 2) == 2.0);
}

TEST_CASE("backward: constant loss gives zero gradients everywhere") {
    const std::size_t widths[] = {4, 5, 3};
    const DenseNet net = random_net(widths, Activation::tanh, 11);
    Rng rng(12);
    Tensor2 x(2, 4);
    for (double& v : x.data) v = rng.normal();
    const ForwardTrace trace = forward_traced(net, x);
    const NetGradients g = backward(net, trace, Tensor2(2, 3)); // dLoss/dout = 0
    for (const Tensor2& dw : g.dweight)
        for (double v : dw.data) CHECK(v == 0.0);
    for (const auto& db : g.dbias)
        for (double v : db) CHECK(v == 0.0);
    for (double v : g.dinput.data) CHECK(v == 0.0);
}

TEST_CASE("backward: missing cache raises a state error") {
    const std::size_t widths[] = {2, 2};
    const DenseNet net = random_net(widths, Activation::relu, 5);
    CHECK_THROWS_AS((void)backward(net, ForwardTrace{}, Tensor2(1, 2)), Error);
}

namespace {

// Scalar loss sum(out * r) so dLoss/dout = r; probes parameters and inputs
// against central finite differences.
void check_gradients_fd(Activation act, std::uint64_t seed, std::size_t probes) {
    const std::size_t widths[] = {4, 6, 5, 3};
    DenseNet net = random_net(widths, act, seed);
    Rng rng(seed + 1);
    Tensor2 x(3, 4);
    for (double& v : x.data) v = rng.normal();
    Tensor2 r(3, 3);
    for (double& v : r.data) v = rng.normal();

    const auto loss_of = [&](const DenseNet& n, const Tensor2& input) {
        const Tensor2 out = forward(n, input);
        double s = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * r.data[i];
        return s;
    };

    // keep relu-family probes away from activation kinks
    const bool kinked = act == Activation::relu || act == Activation::leaky_relu;
    const auto near_kink = [&](const DenseNet& n, const Tensor2& input) {
        if (!kinked) return false;
        const ForwardTrace t = forward_traced(n, input);
        for (const Tensor2& pre : t.pre)
            for (double v : pre.data)
                if (std::abs(v) < 1e-3) return true;
        return false;
    };
    REQUIRE(!near_kink(net, x));

    const ForwardTrace trace = forward_traced(net, x);
    const NetGradients analytic = backward(net, trace, r);

    std::size_t done = 0;
    while (done < probes) {
        const std::size_t l = static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(net.layers.size())));
        const std::size_t kind = static_cast<std::size_t>(rng.uniform_int(3));
        double* param = nullptr;
        double expected = 0.0;
        Tensor2 x_probe = x;
        DenseNet n_probe = net;
        if (kind == 0) {
            const std::size_t i = static_cast<std::size_t>(rng.uniform_int(
                static_cast<int>(net.layers[l].weight.data.size())));
            param = &n_probe.layers[l].weight.data[i];
            expected = analytic.dweight[l].data[i];
        } else if (kind == 1) {
            const std::size_t i = static_cast<std::size_t>(
                rng.uniform_int(static_cast<int>(net.layers[l].bias.size())));
            param = &n_probe.layers[l].bias[i];
            expected = analytic.dbias[l][i];
        } else {
            const std::size_t i =
                static_cast<std::size_t>(rng.uniform_int(static_cast<int>(x.data.size())));
            param = &x_probe.data[i];
            expected = analytic.dinput.data[i];
        }
        const double fd = oracle::central_diff(
            [&](double v) {
                const double saved = *param;
                *param = v;
                const double loss = loss_of(n_probe, x_probe);
                *param = saved;
                return loss;
            },
            *param);
        CHECK(oracle::rel_err(fd, expected) <= 1e-4);
        ++done;
    }
}

} // namespace

TEST_CASE("backward matches finite differences for every activation") {
    check_gradients_fd(Activation::identity, 100, 120);
    check_gradients_fd(Activation::tanh, 200, 120);
    check_gradients_fd(Activation::sigmoid, 300, 120);
    check_gradients_fd(Activation::relu, 402, 120);
    check_gradients_fd(Activation::leaky_relu, 500, 120);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    const std::size_t widths[] = {3, 4, 2};
    DenseNet net = random_net(widths, Activation::relu, 21);
    const std::string before = serialize_net(net);
    AdamState st = make_adam(net, {});
    adam_step(net, zero_gradients(net), st);
    CHECK(serialize_net(net) == before);
}

TEST_CASE("adam: one scalar step matches the bias-corrected hand computation") {
    Tensor2 w(1, 1);
    w(0, 0) = 0.0;
    DenseNet net = single_layer(w, {0.0}, Activation::identity);
    AdamState st = make_adam(net, {.lr = 0.1});
    NetGradients g = zero_gradients(net);
    g.dweight[0](0, 0) = 1.0;

    // scalar Adam with g=1: m^=1, v^=1, delta = -lr/(1+eps)
    const double expected = -0.1 / (1.0 + 1e-8);
    adam_step(net, g, st);
    CHECK(net.layers[0].weight(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(net.layers[0].weight(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam: second moment strictly increases over identical steps") {
    Tensor2 w(1, 1);
    DenseNet net = single_layer(w, {0.0}, Activation::identity);
    AdamState st = make_adam(net, {});
    NetGradients g = zero_gradients(net);
    g.dweight[0](0, 0) = 0.7;
    adam_step(net, g, st);
    const double v1 = st.v_w[0](0, 0);
    adam_step(net, g, st);
    const double v2 = st.v_w[0](0, 0);
    CHECK(v2 > v1);
}

TEST_CASE("adam: NaN gradient raises a training error naming the step") {
    Tensor2 w(1, 1);
    DenseNet net = single_layer(w, {0.0}, Activation::identity);
    AdamState st = make_adam(net, {});
    NetGradients g = zero_gradients(net);
    g.dweight[0](0, 0) = std::nan("");
    CHECK_THROWS_WITH_AS(adam_step(net, g, st), doctest::Contains("adam step 1"), Error);
}

TEST_CASE("softmax_xent: equal logits give ln C") {
    Tensor2 logits(2, 10);
    const std::vector<int> labels = {3, 7};
    const XentResult res = softmax_xent(logits, labels);
    CHECK(res.loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));
}

TEST_CASE("softmax_xent: loss vanishes as the correct-class margin grows") {
    double prev = std::numeric_limits<double>::max();
    for (double margin : {2.0, 5.0, 10.0, 20.0}) {
        Tensor2 logits(1, 4);
        logits(0, 2) = margin;
        const std::vector<int> labels = {2};
        const double loss = softmax_xent(logits, labels).loss;
        CHECK(loss < prev);
        prev = loss;
    }
    CHECK(prev < 1e-8);
}

TEST_CASE("softmax_xent: fixed batch matches a log-sum-exp oracle") {
    Tensor2 logits(2, 3);
    logits(0, 0) = 0.5;
    logits(0, 1) = -1.0;
    logits(0, 2) = 2.0;
    logits(1, 0) = -0.3;
    logits(1, 1) = 0.8;
    logits(1, 2) = 0.1;
    const std::vector<int> labels = {2, 0};

    double expected = 0.0;
    for (std::size_t i = 0; i < 2; ++i) {
        double lse = 0.0;
        for (std::size_t j = 0; j < 3; ++j) lse += std::exp(logits(i, j));
        expected += std::log(lse) - logits(i, static_cast<std::size_t>(labels[i]));
    }
    expected /= 2.0;
    CHECK(softmax_xent(logits, labels).loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("softmax_xent: gradient matches finite differences") {
    Rng rng(9);
    Tensor2 logits(3, 5);
    for (double& v : logits.data) v = rng.normal();
    const std::vector<int> labels = {1, 4, 0};
    const XentResult res = softmax_xent(logits, labels);
    for (std::size_t probe = 0; probe < 120; ++probe) {
        const std::size_t i =
            static_cast<std::size_t>(rng.uniform_int(static_cast<int>(logits.data.size())));
        const double fd = oracle::central_diff(
            [&](double v) {
                Tensor2 l = logits;
                l.data[i] = v;
                return softmax_xent(l, labels).loss;
            },
            logits.data[i]);
        CHECK(oracle::rel_err(fd, res.grad.data[i]) <= 1e-4);
    }
}

TEST_CASE("softmax_xent: out-of-range label raises a data error") {
    Tensor2 logits(1, 3);
    const std::vector<int> labels = {3};
    CHECK_THROWS_AS((void)softmax_xent(logits, labels), Error);
}

TEST_CASE("softmax rows sum to one") {
    Rng rng(31);
    Tensor2 logits(20, 7);
    for (double& v : logits.data) v = rng.normal(0.0, 5.0);
    const Tensor2 p = softmax_rows(logits);
    for (std::size_t i = 0; i < p.rows; ++i) {
        double s = 0.0;
        for (double v : p.row(i)) s += v;
        CHECK(std::abs(s - 1.0) <= 1e-9);
    }
}

TEST_CASE("determinism: same architecture and seed reproduce bit-identical nets") {
    const std::size_t widths[] = {5, 8, 3};
    const DenseNet a = random_net(widths, Activation::leaky_relu, 777);
    const DenseNet b = random_net(widths, Activation::leaky_relu, 777);
    CHECK(serialize_net(a) == serialize_net(b));
    const DenseNet c = random_net(widths, Activation::leaky_relu, 778);
    CHECK(serialize_net(a) != serialize_net(c));
}

TEST_CASE("checkpoint: save/load round trip is bit-exact") {
    const std::size_t widths[] = {4, 7, 7, 2};
    const DenseNet net = random_net(widths, Activation::sigmoid, 99);
    const auto path = std::filesystem::temp_directory_path() / "bal_net_roundtrip.balnet";
    save_net(net, path.string());
    const DenseNet loaded = load_net(path.string());
    CHECK(serialize_net(loaded) == serialize_net(net));
    CHECK(loaded.seed == net.seed);

    // byte-for-byte file identity on re-save
    const auto path2 = std::filesystem::temp_directory_path() / "bal_net_roundtrip2.balnet";
    save_net(loaded, path2.string());
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)),
                         std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)),
                         std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}

TEST_CASE("checkpoint: corrupted magic raises a format error") {
    const std::size_t widths[] = {2, 2};
    const DenseNet net = random_net(widths, Activation::relu, 1);
    std::string bytes = serialize_net(net);
    bytes[0] = 'X';
    CHECK_THROWS_AS((void)deserialize_net(bytes), Error);
    bytes = serialize_net(net);
    bytes.resize(bytes.size() - 3);
    CHECK_THROWS_AS((void)deserialize_net(bytes), Error);
}
