#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bal/net.hpp"
#include "bal/rem.hpp"
#include "bal/rng.hpp"

namespace bal {

enum class FgsmMode { feature, noise, both };

struct FgsmConfig {
    double epsilon_scale = 0.1;     // stddev of the half-normal step size
    FgsmMode mode = FgsmMode::both; // which calibration produces hard negatives
    std::size_t warmup_epochs = 5;  // epochs of GAN training before RSM activates
};

// Step magnitude: |N(0, epsilon_scale^2)|, deterministic under the rng state.
double draw_epsilon(const FgsmConfig& cfg, Rng& rng);

// Label conditioning used by both G and D: feature rows with a one-hot label
// block appended.
Tensor2 concat_onehot(const Tensor2& features, std::span<const int> labels, int class_count);

// One gradient-sign step against the discriminator:
//   f~ = f - eps * sgn(dD(f;c)/df),  sgn(0) = 0.
// D takes feature + one-hot label concatenated.
NegativePair calibrate_feature(const DenseNet& d_net, std::span<const double> feature,
                               int label, int class_count, double eps);

struct NoiseCalibration {
    std::vector<double> z_tilde; // z - eps * dD(G(z;c);c)/dz (raw gradient)
    NegativePair pair;           // feature = G(z~;c), origin hard_fgsm_noise
};

NoiseCalibration calibrate_noise(const DenseNet& g_net, const DenseNet& d_net,
                                 std::span<const double> z, int label, int class_count,
                                 double eps);

// Batched versions used by the training loop; eps is drawn per row.
std::vector<NegativePair> calibrate_feature_batch(const DenseNet& d_net,
                                                  const Tensor2& features,
                                                  std::span<const int> labels,
                                                  int class_count,
                                                  std::span<const double> eps);
std::vector<NegativePair> calibrate_noise_batch(const DenseNet& g_net,
                                                const DenseNet& d_net, const Tensor2& z,
                                                std::span<const int> labels, int class_count,
                                                std::span<const double> eps);

} // namespace bal
