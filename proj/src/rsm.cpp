#include "bal/rsm.hpp"

#include <cmath>

#include "bal/error.hpp"

namespace bal {

namespace {

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

} // namespace

Tensor2 concat_onehot(const Tensor2& features, std::span<const int> labels, int class_count) {
    if (labels.size() != features.rows) fail_shape("concat_onehot: label count mismatch");
    Tensor2 out(features.rows, features.cols + static_cast<std::size_t>(class_count));
    for (std::size_t i = 0; i < features.rows; ++i) {
        const int c = labels[i];
        if (c < 0 || c >= class_count) fail_data("concat_onehot: label out of range");
        double* row = out.data.data() + i * out.cols;
        const double* src = features.data.data() + i * features.cols;
        std::copy_n(src, features.cols, row);
        row[features.cols + static_cast<std::size_t>(c)] = 1.0;
    }
    return out;
}

double draw_epsilon(const FgsmConfig& cfg, Rng& rng) {
    if (!(cfg.epsilon_scale > 0.0)) fail_config("draw_epsilon: epsilon_scale must be positive");
    return std::abs(rng.normal(0.0, cfg.epsilon_scale));
}

std::vector<NegativePair> calibrate_feature_batch(const DenseNet& d_net,
                                                  const Tensor2& features,
                                                  std::span<const int> labels,
                                                  int class_count,
                                                  std::span<const double> eps) {
    if (eps.size() != features.rows) fail_shape("calibrate_feature_batch: eps count mismatch");
    const Tensor2 x = concat_onehot(features, labels, class_count);
    const ForwardTrace trace = forward_traced(d_net, x);
    if (trace.output.cols != 1) fail_shape("calibrate_feature_batch: D must output a scalar");
    Tensor2 ones(trace.output.rows, 1);
    for (double& v : ones.data) v = 1.0;
    const NetGradients grads = backward(d_net, trace, ones);
    if (!all_finite(grads.dinput)) fail_numeric("calibrate_feature: non-finite gradient");

    std::vector<NegativePair> out;
    out.reserve(features.rows);
    for (std::size_t i = 0; i < features.rows; ++i) {
        NegativePair pair;
        pair.origin = NegOrigin::hard_fgsm_feature;
        pair.label = labels[i];
        pair.feature.resize(features.cols);
        for (std::size_t j = 0; j < features.cols; ++j)
            pair.feature[j] = features(i, j) - eps[i] * sign_of(grads.dinput(i, j));
        out.push_back(std::move(pair));
    }
    return out;
}

NegativePair calibrate_feature(const DenseNet& d_net, std::span<const double> feature,
                               int label, int class_count, double eps) {
    if (eps < 0.0) fail_config("calibrate_feature: eps must be non-negative");
    const Tensor2 f = row_tensor(feature);
    const int labels[] = {label};
    const double eps_arr[] = {eps};
    return calibrate_feature_batch(d_net, f, labels, class_count, eps_arr)[0];
}

std::vector<NegativePair> calibrate_noise_batch(const DenseNet& g_net,
                                                const DenseNet& d_net, const Tensor2& z,
                                                std::span<const int> labels, int class_count,
                                                std::span<const double> eps) {
    if (eps.size() != z.rows) fail_shape("calibrate_noise_batch: eps count mismatch");
    const Tensor2 u = concat_onehot(z, labels, class_count);
    const ForwardTrace g_trace = forward_traced(g_net, u);
    const Tensor2& synthetic = g_trace.output; // n x m

    const Tensor2 v = concat_onehot(synthetic, labels, class_count);
    const ForwardTrace d_trace = forward_traced(d_net, v);
    if (d_trace.output.cols != 1) fail_shape("calibrate_noise_batch: D must output a scalar");
    Tensor2 ones(d_trace.output.rows, 1);
    for (double& x : ones.data) x = 1.0;
    const NetGradients d_grads = backward(d_net, d_trace, ones);

    // Chain rule through G: keep the feature part of dD/dv, push it through G.
    Tensor2 df(z.rows, synthetic.cols);
    for (std::size_t i = 0; i < z.rows; ++i)
        for (std::size_t j = 0; j < synthetic.cols; ++j) df(i, j) = d_grads.dinput(i, j);
    const NetGradients g_grads = backward(g_net, g_trace, df);
    if (!all_finite(g_grads.dinput)) fail_numeric("calibrate_noise: non-finite gradient");

    // Eq for the noise route uses the raw gradient, not its sign.
    Tensor2 z_tilde(z.rows, z.cols);
    for (std::size_t i = 0; i < z.rows; ++i)
        for (std::size_t j = 0; j < z.cols; ++j)
            z_tilde(i, j) = z(i, j) - eps[i] * g_grads.dinput(i, j);

    const Tensor2 calibrated = forward(g_net, concat_onehot(z_tilde, labels, class_count));
    std::vector<NegativePair> out;
    out.reserve(z.rows);
    for (std::size_t i = 0; i < z.rows; ++i) {
        NegativePair pair;
        pair.origin = NegOrigin::hard_fgsm_noise;
        pair.label = labels[i];
        pair.feature.assign(calibrated.row(i).begin(), calibrated.row(i).end());
        out.push_back(std::move(pair));
    }
    return out;
}

NoiseCalibration calibrate_noise(const DenseNet& g_net, const DenseNet& d_net,
                                 std::span<const double> z, int label, int class_count,
                                 double eps) {
    if (eps < 0.0) fail_config("calibrate_noise: eps must be non-negative");
    const Tensor2 zt = row_tensor(z);
    const int labels[] = {label};
    const double eps_arr[] = {eps};

    // Recompute z~ explicitly so the caller can inspect it.
    const Tensor2 u = concat_onehot(zt, labels, class_count);
    const ForwardTrace gt = forward_traced(g_net, u);
    const Tensor2 v = concat_onehot(gt.output, labels, class_count);
    const ForwardTrace dt = forward_traced(d_net, v);
    Tensor2 one(1, 1);
    one(0, 0) = 1.0;
    const NetGradients dg = backward(d_net, dt, one);
    Tensor2 df(1, gt.output.cols);
    for (std::size_t j = 0; j < gt.output.cols; ++j) df(0, j) = dg.dinput(0, j);
    const NetGradients gg = backward(g_net, gt, df);

    NoiseCalibration result;
    result.z_tilde.resize(z.size());
    for (std::size_t j = 0; j < z.size(); ++j)
        result.z_tilde[j] = z[j] - eps * gg.dinput(0, j);
    result.pair = calibrate_noise_batch(g_net, d_net, zt, labels, class_count, eps_arr)[0];
    return result;
}

} // namespace bal
