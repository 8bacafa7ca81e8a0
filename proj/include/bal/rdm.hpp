#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bal/data.hpp"
#include "bal/net.hpp"
#include "bal/rem.hpp"
#include "bal/rsm.hpp"

namespace bal {

// Conditional GAN over feature space. G maps (z ++ onehot(c)) to an m-vector;
// D maps (f ++ onehot(c)) to a probability (sigmoid output, clamped before
// every log).
struct CondGan {
    DenseNet g_net;
    DenseNet d_net;
    std::size_t z_dim = 16;
    int class_count = 0;
    double lambda_c = 0.7;   // conflict weight in the uniform loss
    double lambda = 0.01;    // generator L1 regularizer weight
    std::size_t d_steps = 1; // discriminator steps per generator step (M)

    std::size_t feature_dim() const { return g_net.output_width(); }
};

CondGan make_cond_gan(std::size_t feature_dim, int class_count, std::size_t z_dim,
                      std::span<const std::size_t> g_hidden,
                      std::span<const std::size_t> d_hidden, std::uint64_t seed);

// GAN checkpoint: <stem>.g.balnet, <stem>.d.balnet plus a key=value sidecar.
void save_gan(const CondGan& gan, const std::string& stem);
CondGan load_gan(const std::string& stem);

// Discriminator evaluation, sigmoid output clamped to [1e-7, 1-1e-7].
double d_eval(const DenseNet& d_net, std::span<const double> feature, int label,
              int class_count);
std::vector<double> d_eval_batch(const DenseNet& d_net, const Tensor2& features,
                                 std::span<const int> labels, int class_count);

// ---- numeric loss cores (operate on already-evaluated D outputs) ----

// mean(log D(f;T(c)) - log D(f;c))
double shuffle_loss_value(std::span<const double> d_mismatched,
                          std::span<const double> d_matched);
// lambda_c * mean(log D(f^;c^)) - mean(log D(f;c))
double uniform_loss_value(std::span<const double> d_negative,
                          std::span<const double> d_positive, double lambda_c);
// -mean(log D(f;c)) - mean(log(1 - D(G(z);c)))
double vanilla_d_loss_value(std::span<const double> d_real, std::span<const double> d_fake);
// mean(log(1 - D(G(z;c);c))) + lambda * mean(min_{f_c} |f_c - G(z;c)|_1)
double generator_loss_value(std::span<const double> d_fake,
                            std::span<const double> l1_min_dists, double lambda);

// ---- net-facing losses ----

double shuffle_loss(const DenseNet& d_net, const Tensor2& features,
                    std::span<const int> labels, std::span<const int> shuffled_labels,
                    int class_count);
double uniform_loss(const DenseNet& d_net, const Tensor2& pos_features,
                    std::span<const int> pos_labels,
                    std::span<const NegativePair> neg_pairs, double lambda_c,
                    int class_count);
double vanilla_d_loss(const DenseNet& d_net, const DenseNet& g_net, const Tensor2& features,
                      std::span<const int> labels, const Tensor2& z_batch,
                      std::span<const int> fake_labels, int class_count);

// Nearest class features for the generator regularizer: the current batch's
// class-c rows, with a persistent per-class reservoir as fallback.
struct ClassFeatureIndex {
    std::vector<std::vector<std::vector<double>>> per_class;

    static ClassFeatureIndex from_batch(const Tensor2& features, std::span<const int> labels,
                                        int class_count);
    static ClassFeatureIndex reservoir_from_bank(const FeatureBank& bank,
                                                 std::size_t per_class_cap, Rng& rng);
    bool has_class(int c) const;
};

double min_l1_distance(std::span<const double> point,
                       const std::vector<std::vector<double>>& candidates);

double generator_loss(const DenseNet& g_net, const DenseNet& d_net, const Tensor2& z_batch,
                      std::span<const int> labels, const ClassFeatureIndex& batch_index,
                      const ClassFeatureIndex& reservoir, double lambda, int class_count);

// ---- training ----

struct LossBreakdown {
    double l_t = 0.0;
    double l_s = 0.0;
    double l_u = 0.0;
    double l_d = 0.0; // always stored as l_t + l_s + l_u
    double l_g = 0.0;
};

enum class NegSampler { uniform, gaussian };

struct BalTrainConfig {
    std::size_t epochs = 30;
    std::size_t batch_size = 128;
    double d_lr = 2e-4;
    double g_lr = 2e-4;
    std::uint64_t seed = 0;
    bool use_shuffle_loss = true;
    bool use_uniform_loss = true;
    double neg_trivial_ratio = 1.0; // trivial negatives per ID sample
    double neg_hard_ratio = 1.0;    // hard negatives per ID sample (post warmup)
    NegSampler sampler = NegSampler::uniform;
    double gaussian_q = 0.5;        // low-density quantile for the gaussian sampler
    double bounds_margin = 0.0;     // fractional box expansion
    bool global_bounds = false;     // ablation: bank-wide bounds instead of per batch
    double fgsm_scale_factor = 0.1; // epsilon scale = factor * mean per-dim batch range
    FgsmMode fgsm_mode = FgsmMode::both;
    std::size_t warmup_epochs = 5;
    bool nonsaturating_g = false;
    std::size_t reservoir_per_class = 512;
};

struct TrainLog {
    std::vector<LossBreakdown> per_batch;
    std::vector<LossBreakdown> per_epoch; // batch means
};

// Algorithm: per batch compute bounds, build shuffled / trivial / hard
// negatives, take gan.d_steps discriminator steps on L_d = L_t + L_s + L_u,
// then one generator step on L_g. Deterministic under cfg.seed.
TrainLog train_bal(CondGan& gan, const FeatureBank& bank, const BalTrainConfig& cfg);

void write_loss_csv(const TrainLog& log, const std::string& path);

// Table-5 comparator: fit per-class diagonal Gaussians to the bank and emit
// the lowest-density fraction q of candidate draws as negatives.
std::vector<NegativePair> gaussian_sample_ablation(const FeatureBank& bank, std::size_t k,
                                                   std::uint64_t seed, double q = 0.5);

// Internal steps, exposed for the descent sanity tests.
struct BalBatch {
    Tensor2 features;
    std::vector<int> labels;
    std::vector<int> shuffled_labels;        // empty when shuffle loss disabled
    std::vector<NegativePair> negatives;     // trivial + hard, uniform-loss fodder
};

LossBreakdown discriminator_step(CondGan& gan, const BalBatch& batch, AdamState& d_adam,
                                 const BalTrainConfig& cfg, Rng& rng);
double generator_step(CondGan& gan, const ClassFeatureIndex& batch_index,
                      const ClassFeatureIndex& reservoir, std::size_t n_fake,
                      AdamState& g_adam, const BalTrainConfig& cfg, Rng& rng);

} // namespace bal
