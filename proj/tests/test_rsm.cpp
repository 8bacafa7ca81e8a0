#include <cmath>

#include "bal/error.hpp"
#include "bal/rsm.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bal;

namespace {

// D = sigmoid(w . f + w_c . onehot(c) + b), single sigmoid layer over m + C inputs.
DenseNet linear_sigmoid_d(const std::vector<double>& w_feature,
                          const std::vector<double>& w_label, double bias) {
    DenseNet d;
    Tensor2 w(w_feature.size() + w_label.size(), 1);
    for (std::size_t i = 0; i < w_feature.size(); ++i) w(i, 0) = w_feature[i];
    for (std::size_t i = 0; i < w_label.size(); ++i) w(w_feature.size() + i, 0) = w_label[i];
    d.layers.push_back({std::move(w), {bias}, Activation::sigmoid});
    return d;
}

} // namespace

TEST_CASE("calibrate_feature: eps = 0 is the identity") {
    const DenseNet d = linear_sigmoid_d({0.5, -1.0}, {0.2, 0.1}, 0.0);
    const std::vector<double> f = {1.0, 2.0};
    const NegativePair pair = calibrate_feature(d, f, 1, 2, 0.0);
    CHECK(pair.feature == f);
    CHECK(pair.origin == NegOrigin::hard_fgsm_feature);
    CHECK(pair.label == 1);
}

TEST_CASE("calibrate_feature: linear discriminator closed form") {
    const std::vector<double> w = {0.7, -0.3, 0.0};
    const DenseNet d = linear_sigmoid_d(w, {0.4}, -0.1);
    const std::vector<double> f = {0.2, 0.5, -0.8};
    const double eps = 0.05;
    const NegativePair pair = calibrate_feature(d, f, 0, 1, eps);

    // f~ = f - eps*sgn(w); sigmoid is monotone so sgn(dD/df) = sgn(w)
    CHECK(pair.feature[0] == doctest::Approx(f[0] - eps).epsilon(1e-15));
    CHECK(pair.feature[1] == doctest::Approx(f[1] + eps).epsilon(1e-15));
    CHECK(pair.feature[2] == doctest::Approx(f[2]).epsilon(1e-15)); // sgn(0) = 0

    // the step strictly lowers the discriminator score
    const Tensor2 before = forward(d, concat_onehot(row_tensor(f), std::array{0}, 1));
    const Tensor2 after =
        forward(d, concat_onehot(row_tensor(pair.feature), std::array{0}, 1));
    CHECK(after(0, 0) < before(0, 0));
}

TEST_CASE("calibrate_feature: steps are always in {-eps, 0, +eps}") {
    const std::size_t widths[] = {6, 8, 1};
    const Activation acts[] = {Activation::leaky_relu, Activation::sigmoid};
    const DenseNet d = make_dense_net(widths, acts, 60);
    Rng rng(61);
    const double eps = 0.25;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> f(4);
        for (double& v : f) v = rng.normal();
        const int label = rng.uniform_int(2);
        const NegativePair pair = calibrate_feature(d, f, label, 2, eps);
        for (std::size_t j = 0; j < f.size(); ++j) {
            const double step = pair.feature[j] - f[j];
            const bool valid = step == 0.0 || std::abs(std::abs(step) - eps) < 1e-15;
            CHECK(valid);
        }
    }
}

TEST_CASE("calibrate_noise: eps = 0 keeps z and returns G(z;c)") {
    const std::size_t gw[] = {3, 4, 2};
    const Activation ga[] = {Activation::tanh, Activation::identity};
    const DenseNet g = make_dense_net(gw, ga, 62);
    const DenseNet d = linear_sigmoid_d({1.0, -1.0}, {0.3}, 0.0);
    const std::vector<double> z = {0.1, -0.2};
    const NoiseCalibration nc = calibrate_noise(g, d, z, 0, 1, 0.0);
    CHECK(nc.z_tilde == z);
    const Tensor2 direct = forward(g, concat_onehot(row_tensor(z), std::array{0}, 1));
    for (std::size_t j = 0; j < 2; ++j)
        CHECK(nc.pair.feature[j] == doctest::Approx(direct(0, j)).epsilon(1e-15));
    CHECK(nc.pair.origin == NegOrigin::hard_fgsm_noise);
}

TEST_CASE("calibrate_noise: linear G, linear D matches the hand chain rule") {
    // G(u) = A^T u (identity activation), D = sigmoid(w . v + b)
    DenseNet g;
    Tensor2 a(3, 2); // inputs: z0 z1 + onehot(c) with C=1
    a(0, 0) = 0.5;
    a(0, 1) = -0.2;
    a(1, 0) = 0.8;
    a(1, 1) = 0.3;
    a(2, 0) = -0.1;
    a(2, 1) = 0.4;
    g.layers.push_back({a, {0.0, 0.0}, Activation::identity});
    const std::vector<double> w = {1.2, -0.7};
    const DenseNet d = linear_sigmoid_d(w, {0.15}, 0.05);

    const std::vector<double> z = {0.3, -0.6};
    const double eps = 0.1;
    const NoiseCalibration nc = calibrate_noise(g, d, z, 0, 1, eps);

    // hand chain rule: u = (z0, z1, 1); f = A^T u; s = w.f + w_c + b
    const double f0 = a(0, 0) * z[0] + a(1, 0) * z[1] + a(2, 0);
    const double f1 = a(0, 1) * z[0] + a(1, 1) * z[1] + a(2, 1);
    const double s = w[0] * f0 + w[1] * f1 + 0.15 + 0.05;
    const double sig = 1.0 / (1.0 + std::exp(-s));
    const double dsig = sig * (1.0 - sig);
    // dD/dz_i = dsig * sum_j w_j * A[i][j]
    const double g0 = dsig * (w[0] * a(0, 0) + w[1] * a(0, 1));
    const double g1 = dsig * (w[0] * a(1, 0) + w[1] * a(1, 1));
    CHECK(nc.z_tilde[0] == doctest::Approx(z[0] - eps * g0).epsilon(1e-12));
    CHECK(nc.z_tilde[1] == doctest::Approx(z[1] - eps * g1).epsilon(1e-12));
}

TEST_CASE("calibrate_noise: dD(G(z))/dz matches finite differences") {
    const std::size_t gw[] = {5, 7, 3};
    const Activation ga[] = {Activation::tanh, Activation::identity};
    const DenseNet g = make_dense_net(gw, ga, 63);
    const std::size_t dw[] = {6, 9, 1};
    const Activation da[] = {Activation::tanh, Activation::sigmoid};
    const DenseNet d = make_dense_net(dw, da, 64);

    Rng rng(65);
    std::vector<double> z(2);
    for (double& v : z) v = rng.normal();
    const int label = 1;
    const int C = 3;

    const double eps = 1.0; // z~ = z - grad, so grad = z - z~
    const NoiseCalibration nc = calibrate_noise(g, d, z, label, C, eps);

    const auto d_of_z = [&](const std::vector<double>& zz) {
        const Tensor2 f = forward(g, concat_onehot(row_tensor(zz), std::array{label}, C));
        std::vector<double> fv(f.row(0).begin(), f.row(0).end());
        const Tensor2 p = forward(d, concat_onehot(row_tensor(fv), std::array{label}, C));
        return p(0, 0);
    };
    for (std::size_t j = 0; j < z.size(); ++j) {
        const double analytic = z[j] - nc.z_tilde[j];
        const double fd = oracle::central_diff(
            [&](double v) {
                std::vector<double> zz = z;
                zz[j] = v;
                return d_of_z(zz);
            },
            z[j]);
        CHECK(oracle::rel_err(fd, analytic) <= 1e-4);
    }
}

TEST_CASE("draw_epsilon: non-negative, correct half-normal mean, vanishing scale") {
    FgsmConfig cfg;
    cfg.epsilon_scale = 0.4;
    Rng rng(66);
    const std::size_t n = 100000;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = draw_epsilon(cfg, rng);
        CHECK(e >= 0.0);
        mean += e;
    }
    mean /= static_cast<double>(n);
    const double expected = cfg.epsilon_scale * std::sqrt(2.0 / M_PI);
    const double sd = cfg.epsilon_scale * std::sqrt(1.0 - 2.0 / M_PI);
    CHECK(std::abs(mean - expected) <= 3.0 * sd / std::sqrt(static_cast<double>(n)));

    FgsmConfig tiny;
    tiny.epsilon_scale = 1e-12;
    Rng rng2(67);
    for (int i = 0; i < 100; ++i) CHECK(draw_epsilon(tiny, rng2) <= 1e-10);
}
