#include "bal/rdm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "bal/error.hpp"
#include "bal/loss.hpp"

namespace bal {

CondGan make_cond_gan(std::size_t feature_dim, int class_count, std::size_t z_dim,
                      std::span<const std::size_t> g_hidden,
                      std::span<const std::size_t> d_hidden, std::uint64_t seed) {
    if (feature_dim == 0) fail_config("make_cond_gan: feature_dim must be positive");
    if (class_count < 1) fail_config("make_cond_gan: class_count must be positive");
    if (z_dim == 0) fail_config("make_cond_gan: z_dim must be positive");
    const std::size_t c = static_cast<std::size_t>(class_count);

    std::vector<std::size_t> g_widths;
    g_widths.push_back(z_dim + c);
    g_widths.insert(g_widths.end(), g_hidden.begin(), g_hidden.end());
    g_widths.push_back(feature_dim);
    std::vector<Activation> g_acts(g_widths.size() - 1, Activation::leaky_relu);
    g_acts.back() = Activation::identity;

    std::vector<std::size_t> d_widths;
    d_widths.push_back(feature_dim + c);
    d_widths.insert(d_widths.end(), d_hidden.begin(), d_hidden.end());
    d_widths.push_back(1);
    std::vector<Activation> d_acts(d_widths.size() - 1, Activation::leaky_relu);
    d_acts.back() = Activation::sigmoid;

    CondGan gan;
    gan.g_net = make_dense_net(g_widths, g_acts, seed);
    gan.d_net = make_dense_net(d_widths, d_acts, seed + 1);
    gan.z_dim = z_dim;
    gan.class_count = class_count;
    return gan;
}

void save_gan(const CondGan& gan, const std::string& stem) {
    save_net(gan.g_net, stem + ".g.balnet");
    save_net(gan.d_net, stem + ".d.balnet");
    std::ofstream f(stem + ".meta", std::ios::trunc);
    if (!f) fail_data("cannot open for write: " + stem + ".meta");
    char buf[64];
    f << "z_dim = " << gan.z_dim << "\n";
    f << "class_count = " << gan.class_count << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", gan.lambda_c);
    f << "lambda_c = " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.17g", gan.lambda);
    f << "lambda = " << buf << "\n";
    f << "d_steps = " << gan.d_steps << "\n";
    if (!f) fail_data("write failed: " + stem + ".meta");
}

CondGan load_gan(const std::string& stem) {
    CondGan gan;
    gan.g_net = load_net(stem + ".g.balnet");
    gan.d_net = load_net(stem + ".d.balnet");
    std::ifstream f(stem + ".meta");
    if (!f) fail_data("cannot open: " + stem + ".meta");
    std::string line;
    while (std::getline(f, line)) {
        std::istringstream ls(line);
        std::string key, eq;
        if (!(ls >> key >> eq) || eq != "=") continue;
        if (key == "z_dim") ls >> gan.z_dim;
        else if (key == "class_count") ls >> gan.class_count;
        else if (key == "lambda_c") ls >> gan.lambda_c;
        else if (key == "lambda") ls >> gan.lambda;
        else if (key == "d_steps") ls >> gan.d_steps;
    }
    return gan;
}

double d_eval(const DenseNet& d_net, std::span<const double> feature, int label,
              int class_count) {
    const int labels[] = {label};
    return d_eval_batch(d_net, row_tensor(feature), labels, class_count)[0];
}

std::vector<double> d_eval_batch(const DenseNet& d_net, const Tensor2& features,
                                 std::span<const int> labels, int class_count) {
    const Tensor2 out = forward(d_net, concat_onehot(features, labels, class_count));
    if (out.cols != 1) fail_shape("d_eval: discriminator must output a scalar");
    std::vector<double> probs(out.rows);
    for (std::size_t i = 0; i < out.rows; ++i) probs[i] = clamp_prob(out(i, 0));
    return probs;
}

// ---- numeric loss cores ----

namespace {

double mean_log(std::span<const double> probs) {
    double s = 0.0;
    for (double p : probs) s += safe_log(p);
    return s / static_cast<double>(probs.size());
}

double mean_log_1m(std::span<const double> probs) {
    double s = 0.0;
    for (double p : probs) s += safe_log(1.0 - p);
    return s / static_cast<double>(probs.size());
}

} // namespace

double shuffle_loss_value(std::span<const double> d_mismatched,
                          std::span<const double> d_matched) {
    if (d_mismatched.empty() || d_mismatched.size() != d_matched.size())
        fail_data("shuffle_loss: need equal non-empty score sets");
    return mean_log(d_mismatched) - mean_log(d_matched);
}

double uniform_loss_value(std::span<const double> d_negative,
                          std::span<const double> d_positive, double lambda_c) {
    if (d_negative.empty() || d_positive.empty())
        fail_data("uniform_loss: need non-empty positive and negative sets");
    return lambda_c * mean_log(d_negative) - mean_log(d_positive);
}

double vanilla_d_loss_value(std::span<const double> d_real, std::span<const double> d_fake) {
    if (d_real.empty() || d_fake.empty())
        fail_data("vanilla_d_loss: need non-empty real and fake sets");
    return -mean_log(d_real) - mean_log_1m(d_fake);
}

double generator_loss_value(std::span<const double> d_fake,
                            std::span<const double> l1_min_dists, double lambda) {
    if (d_fake.empty() || d_fake.size() != l1_min_dists.size())
        fail_data("generator_loss: need matching non-empty sets");
    double reg = 0.0;
    for (double d : l1_min_dists) reg += d;
    reg /= static_cast<double>(l1_min_dists.size());
    return mean_log_1m(d_fake) + lambda * reg;
}

// ---- net-facing losses ----

double shuffle_loss(const DenseNet& d_net, const Tensor2& features,
                    std::span<const int> labels, std::span<const int> shuffled_labels,
                    int class_count) {
    if (labels.size() != shuffled_labels.size())
        fail_shape("shuffle_loss: label count mismatch");
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == shuffled_labels[i])
            fail_data("shuffle_loss: shuffled label equals original at index " +
                      std::to_string(i));
    const std::vector<double> d_matched = d_eval_batch(d_net, features, labels, class_count);
    const std::vector<double> d_mismatched =
        d_eval_batch(d_net, features, shuffled_labels, class_count);
    return shuffle_loss_value(d_mismatched, d_matched);
}

namespace {

Tensor2 pairs_to_tensor(std::span<const NegativePair> pairs) {
    if (pairs.empty()) fail_data("no negative pairs");
    Tensor2 t(pairs.size(), pairs[0].feature.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].feature.size() != t.cols) fail_shape("negative pair width mismatch");
        std::copy(pairs[i].feature.begin(), pairs[i].feature.end(),
                  t.data.begin() + i * t.cols);
    }
    return t;
}

std::vector<int> pair_labels(std::span<const NegativePair> pairs) {
    std::vector<int> l(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) l[i] = pairs[i].label;
    return l;
}

} // namespace

double uniform_loss(const DenseNet& d_net, const Tensor2& pos_features,
                    std::span<const int> pos_labels,
                    std::span<const NegativePair> neg_pairs, double lambda_c,
                    int class_count) {
    if (pos_features.rows == 0) fail_data("uniform_loss: empty positive set");
    if (neg_pairs.empty()) fail_data("uniform_loss: empty negative set");
    const std::vector<double> d_pos =
        d_eval_batch(d_net, pos_features, pos_labels, class_count);
    const std::vector<int> neg_labels = pair_labels(neg_pairs);
    const std::vector<double> d_neg =
        d_eval_batch(d_net, pairs_to_tensor(neg_pairs), neg_labels, class_count);
    return uniform_loss_value(d_neg, d_pos, lambda_c);
}

double vanilla_d_loss(const DenseNet& d_net, const DenseNet& g_net, const Tensor2& features,
                      std::span<const int> labels, const Tensor2& z_batch,
                      std::span<const int> fake_labels, int class_count) {
    const std::vector<double> d_real = d_eval_batch(d_net, features, labels, class_count);
    const Tensor2 fake = forward(g_net, concat_onehot(z_batch, fake_labels, class_count));
    const std::vector<double> d_fake = d_eval_batch(d_net, fake, fake_labels, class_count);
    return vanilla_d_loss_value(d_real, d_fake);
}

ClassFeatureIndex ClassFeatureIndex::from_batch(const Tensor2& features,
                                                std::span<const int> labels,
                                                int class_count) {
    ClassFeatureIndex idx;
    idx.per_class.assign(static_cast<std::size_t>(class_count), {});
    for (std::size_t i = 0; i < features.rows; ++i) {
        const int c = labels[i];
        if (c < 0 || c >= class_count) fail_data("class feature index: label out of range");
        idx.per_class[static_cast<std::size_t>(c)].emplace_back(features.row(i).begin(),
                                                                features.row(i).end());
    }
    return idx;
}

ClassFeatureIndex ClassFeatureIndex::reservoir_from_bank(const FeatureBank& bank,
                                                         std::size_t per_class_cap,
                                                         Rng& rng) {
    ClassFeatureIndex idx;
    idx.per_class.assign(static_cast<std::size_t>(bank.class_count), {});
    for (int c = 0; c < bank.class_count; ++c) {
        const auto& rows = bank.by_class[static_cast<std::size_t>(c)];
        std::vector<std::size_t> chosen(rows);
        if (chosen.size() > per_class_cap) {
            // partial Fisher-Yates: the first per_class_cap entries end up a
            // uniform subsample
            for (std::size_t i = 0; i < per_class_cap; ++i) {
                const std::size_t j =
                    i + static_cast<std::size_t>(
                            rng.uniform_int(static_cast<int>(chosen.size() - i)));
                std::swap(chosen[i], chosen[j]);
            }
            chosen.resize(per_class_cap);
        }
        for (std::size_t row : chosen)
            idx.per_class[static_cast<std::size_t>(c)].emplace_back(
                bank.features.row(row).begin(), bank.features.row(row).end());
    }
    return idx;
}

bool ClassFeatureIndex::has_class(int c) const {
    return c >= 0 && static_cast<std::size_t>(c) < per_class.size() &&
           !per_class[static_cast<std::size_t>(c)].empty();
}

double min_l1_distance(std::span<const double> point,
                       const std::vector<std::vector<double>>& candidates) {
    if (candidates.empty()) fail_data("min_l1_distance: no candidates");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& cand : candidates) {
        double d = 0.0;
        for (std::size_t j = 0; j < point.size(); ++j) d += std::abs(point[j] - cand[j]);
        best = std::min(best, d);
    }
    return best;
}

namespace {

const std::vector<std::vector<double>>& class_candidates(const ClassFeatureIndex& batch_index,
                                                         const ClassFeatureIndex& reservoir,
                                                         int c) {
    if (batch_index.has_class(c)) return batch_index.per_class[static_cast<std::size_t>(c)];
    if (reservoir.has_class(c)) return reservoir.per_class[static_cast<std::size_t>(c)];
    fail_config("generator regularizer: no ID features available for class " +
                std::to_string(c));
}

} // namespace

double generator_loss(const DenseNet& g_net, const DenseNet& d_net, const Tensor2& z_batch,
                      std::span<const int> labels, const ClassFeatureIndex& batch_index,
                      const ClassFeatureIndex& reservoir, double lambda, int class_count) {
    if (z_batch.rows == 0) fail_data("generator_loss: empty z batch");
    const Tensor2 fake = forward(g_net, concat_onehot(z_batch, labels, class_count));
    const std::vector<double> d_fake = d_eval_batch(d_net, fake, labels, class_count);
    std::vector<double> dists(fake.rows);
    for (std::size_t i = 0; i < fake.rows; ++i)
        dists[i] =
            min_l1_distance(fake.row(i), class_candidates(batch_index, reservoir, labels[i]));
    return generator_loss_value(d_fake, dists, lambda);
}

// ---- training ----

namespace {

struct DGroup {
    Tensor2 input;      // concat(feature, onehot)
    double coeff = 0.0; // dL/d(log D) per sample, before the 1/n factor
    bool one_minus = false;
};

// Forward/backward one conditioned group and add its gradient contribution.
// Returns the clamped probabilities.
std::vector<double> d_group_pass(const DenseNet& d_net, const Tensor2& input, double coeff,
                                 bool one_minus, NetGradients& acc) {
    const ForwardTrace trace = forward_traced(d_net, input);
    const std::size_t n = trace.output.rows;
    std::vector<double> probs(n);
    Tensor2 out_grad(n, 1);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = trace.output(i, 0);
        probs[i] = clamp_prob(p);
        if (one_minus) {
            // term: coeff * mean log(1 - D)
            out_grad(i, 0) = -coeff * inv_n / std::max(1.0 - p, kProbClamp);
        } else {
            // term: coeff * mean log D
            out_grad(i, 0) = coeff * inv_n / probs[i];
        }
    }
    const NetGradients g = backward(d_net, trace, out_grad);
    accumulate(acc, g);
    return probs;
}

Tensor2 sample_z(std::size_t n, std::size_t z_dim, Rng& rng) {
    Tensor2 z(n, z_dim);
    for (double& v : z.data) v = rng.normal();
    return z;
}

std::vector<int> sample_labels(std::size_t n, int class_count, Rng& rng) {
    std::vector<int> labels(n);
    for (int& l : labels) l = rng.uniform_int(class_count);
    return labels;
}

// Per-class diagonal Gaussian fit, the Table-5 comparator.
struct GaussianSampler {
    std::vector<std::vector<double>> mean; // per class
    std::vector<std::vector<double>> var;  // per class, floored

    static GaussianSampler fit(const FeatureBank& bank) {
        GaussianSampler gs;
        const std::size_t m = bank.dim();
        gs.mean.assign(static_cast<std::size_t>(bank.class_count), std::vector<double>(m, 0.0));
        gs.var = gs.mean;
        for (int c = 0; c < bank.class_count; ++c) {
            const auto& rows = bank.by_class[static_cast<std::size_t>(c)];
            if (rows.size() < 2)
                fail_data("gaussian sampler: class " + std::to_string(c) +
                          " needs at least 2 features");
            auto& mu = gs.mean[static_cast<std::size_t>(c)];
            auto& sig2 = gs.var[static_cast<std::size_t>(c)];
            for (std::size_t r : rows) {
                const auto row = bank.features.row(r);
                for (std::size_t j = 0; j < m; ++j) mu[j] += row[j];
            }
            for (std::size_t j = 0; j < m; ++j) mu[j] /= static_cast<double>(rows.size());
            for (std::size_t r : rows) {
                const auto row = bank.features.row(r);
                for (std::size_t j = 0; j < m; ++j) {
                    const double d = row[j] - mu[j];
                    sig2[j] += d * d;
                }
            }
            for (std::size_t j = 0; j < m; ++j)
                sig2[j] = std::max(sig2[j] / static_cast<double>(rows.size()), 1e-6);
        }
        return gs;
    }

    double log_density(int c, std::span<const double> x) const {
        const auto& mu = mean[static_cast<std::size_t>(c)];
        const auto& sig2 = var[static_cast<std::size_t>(c)];
        double ld = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            const double d = x[j] - mu[j];
            ld += -0.5 * (d * d / sig2[j] + std::log(2.0 * M_PI * sig2[j]));
        }
        return ld;
    }

    // k draws, lowest-density fraction q kept from a pool of ceil(k/q).
    std::vector<NegativePair> sample(std::size_t k, double q, Rng& rng) const {
        std::vector<NegativePair> out;
        out.reserve(k);
        const int classes = static_cast<int>(mean.size());
        // split k as evenly as possible across classes
        for (int c = 0; c < classes; ++c) {
            const std::size_t k_c =
                k / static_cast<std::size_t>(classes) +
                (static_cast<std::size_t>(c) < k % static_cast<std::size_t>(classes) ? 1 : 0);
            if (k_c == 0) continue;
            const std::size_t pool =
                std::max(k_c, static_cast<std::size_t>(
                                  std::ceil(static_cast<double>(k_c) / q)));
            std::vector<std::pair<double, std::vector<double>>> cand;
            cand.reserve(pool);
            const auto& mu = mean[static_cast<std::size_t>(c)];
            const auto& sig2 = var[static_cast<std::size_t>(c)];
            for (std::size_t i = 0; i < pool; ++i) {
                std::vector<double> x(mu.size());
                for (std::size_t j = 0; j < mu.size(); ++j)
                    x[j] = rng.normal(mu[j], std::sqrt(sig2[j]));
                const double ld = log_density(c, x);
                cand.emplace_back(ld, std::move(x));
            }
            std::stable_sort(cand.begin(), cand.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            for (std::size_t i = 0; i < k_c; ++i) {
                NegativePair pair;
                pair.feature = std::move(cand[i].second);
                pair.label = c;
                pair.origin = NegOrigin::trivial_uniform;
                out.push_back(std::move(pair));
            }
        }
        return out;
    }
};

} // namespace

LossBreakdown discriminator_step(CondGan& gan, const BalBatch& batch, AdamState& d_adam,
                                 const BalTrainConfig& cfg, Rng& rng) {
    const int C = gan.class_count;
    const std::size_t n = batch.features.rows;
    if (n == 0) fail_data("discriminator_step: empty batch");

    const bool with_shuffle = cfg.use_shuffle_loss && !batch.shuffled_labels.empty();
    const bool with_uniform = cfg.use_uniform_loss;
    const bool with_negatives = with_uniform && !batch.negatives.empty();

    NetGradients acc = zero_gradients(gan.d_net);

    // real pairs appear in L_t and once more per enabled extra loss
    const double real_coeff = -(1.0 + (with_shuffle ? 1.0 : 0.0) + (with_uniform ? 1.0 : 0.0));
    const Tensor2 real_in = concat_onehot(batch.features, batch.labels, C);
    const std::vector<double> d_real = d_group_pass(gan.d_net, real_in, real_coeff, false, acc);

    // fresh fakes for the vanilla term
    const Tensor2 z = sample_z(n, gan.z_dim, rng);
    const std::vector<int> fake_labels = sample_labels(n, C, rng);
    const Tensor2 fake = forward(gan.g_net, concat_onehot(z, fake_labels, C));
    const Tensor2 fake_in = concat_onehot(fake, fake_labels, C);
    const std::vector<double> d_fake = d_group_pass(gan.d_net, fake_in, -1.0, true, acc);

    std::vector<double> d_shuf;
    if (with_shuffle) {
        const Tensor2 shuf_in = concat_onehot(batch.features, batch.shuffled_labels, C);
        d_shuf = d_group_pass(gan.d_net, shuf_in, 1.0, false, acc);
    }

    std::vector<double> d_neg;
    if (with_negatives) {
        const std::vector<int> neg_labels = pair_labels(batch.negatives);
        const Tensor2 neg_in =
            concat_onehot(pairs_to_tensor(batch.negatives), neg_labels, C);
        d_neg = d_group_pass(gan.d_net, neg_in, gan.lambda_c, false, acc);
    }

    LossBreakdown loss;
    loss.l_t = vanilla_d_loss_value(d_real, d_fake);
    loss.l_s = with_shuffle ? shuffle_loss_value(d_shuf, d_real) : 0.0;
    if (with_negatives)
        loss.l_u = uniform_loss_value(d_neg, d_real, gan.lambda_c);
    else if (with_uniform)
        loss.l_u = -mean_log(d_real); // no negatives yet (pre-warmup, ratio 0)
    loss.l_d = loss.l_t + loss.l_s + loss.l_u;

    adam_step(gan.d_net, acc, d_adam);
    return loss;
}

double generator_step(CondGan& gan, const ClassFeatureIndex& batch_index,
                      const ClassFeatureIndex& reservoir, std::size_t n_fake,
                      AdamState& g_adam, const BalTrainConfig& cfg, Rng& rng) {
    const int C = gan.class_count;
    const Tensor2 z = sample_z(n_fake, gan.z_dim, rng);
    const std::vector<int> labels = sample_labels(n_fake, C, rng);

    const ForwardTrace g_trace = forward_traced(gan.g_net, concat_onehot(z, labels, C));
    const Tensor2& fake = g_trace.output;
    const ForwardTrace d_trace =
        forward_traced(gan.d_net, concat_onehot(fake, labels, C));

    const std::size_t m = fake.cols;
    const double inv_n = 1.0 / static_cast<double>(n_fake);
    std::vector<double> d_fake(n_fake), dists(n_fake);
    Tensor2 d_out_grad(n_fake, 1);
    std::vector<std::span<const double>> nearest(n_fake);

    for (std::size_t i = 0; i < n_fake; ++i) {
        const double p = d_trace.output(i, 0);
        d_fake[i] = clamp_prob(p);
        if (cfg.nonsaturating_g)
            d_out_grad(i, 0) = -inv_n / d_fake[i];
        else
            d_out_grad(i, 0) = -inv_n / std::max(1.0 - p, kProbClamp);

        const auto& cands = class_candidates(batch_index, reservoir, labels[i]);
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t k = 0; k < cands.size(); ++k) {
            double d = 0.0;
            for (std::size_t j = 0; j < m; ++j) d += std::abs(fake(i, j) - cands[k][j]);
            if (d < best) { best = d; best_idx = k; }
        }
        dists[i] = best;
        nearest[i] = cands[best_idx];
    }

    const NetGradients d_grads = backward(gan.d_net, d_trace, d_out_grad);

    // dL_g/dfake: GAN term through D plus the L1 regularizer subgradient.
    Tensor2 dfake(n_fake, m);
    for (std::size_t i = 0; i < n_fake; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double diff = fake(i, j) - nearest[i][j];
            const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            dfake(i, j) = d_grads.dinput(i, j) + gan.lambda * inv_n * sgn;
        }
    }
    const NetGradients g_grads = backward(gan.g_net, g_trace, dfake);
    adam_step(gan.g_net, g_grads, g_adam);

    if (cfg.nonsaturating_g) {
        double s = 0.0;
        for (std::size_t i = 0; i < n_fake; ++i) s += -safe_log(d_fake[i]);
        s *= inv_n;
        double reg = 0.0;
        for (double d : dists) reg += d;
        return s + gan.lambda * reg * inv_n;
    }
    return generator_loss_value(d_fake, dists, gan.lambda);
}

TrainLog train_bal(CondGan& gan, const FeatureBank& bank, const BalTrainConfig& cfg) {
    if (gan.feature_dim() != bank.dim())
        fail_shape("train_bal: GAN feature_dim != bank dim");
    if (gan.class_count != bank.class_count)
        fail_shape("train_bal: GAN class_count != bank class_count");
    for (int c = 0; c < bank.class_count; ++c)
        if (bank.by_class[static_cast<std::size_t>(c)].empty())
            fail_config("train_bal: bank has no features for class " + std::to_string(c));

    TrainLog log;
    if (cfg.epochs == 0) return log;

    Rng rng(cfg.seed);
    AdamState d_adam = make_adam(gan.d_net, {.lr = cfg.d_lr});
    AdamState g_adam = make_adam(gan.g_net, {.lr = cfg.g_lr});
    const ClassFeatureIndex reservoir =
        ClassFeatureIndex::reservoir_from_bank(bank, cfg.reservoir_per_class, rng);

    GaussianSampler gauss;
    if (cfg.sampler == NegSampler::gaussian) {
        if (!(cfg.gaussian_q > 0.0) || cfg.gaussian_q > 1.0)
            fail_config("train_bal: gaussian_q must be in (0, 1]");
        gauss = GaussianSampler::fit(bank);
    }

    BatchBounds global;
    if (cfg.global_bounds) global = batch_bounds(bank.features);

    std::vector<std::size_t> order(bank.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t batch_counter = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1],
                      order[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);

        std::vector<LossBreakdown> epoch_losses;
        for (std::size_t start = 0; start < bank.size(); start += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, bank.size() - start);
            BalBatch batch;
            batch.features = Tensor2(n, bank.dim());
            batch.labels.resize(n);
            for (std::size_t r = 0; r < n; ++r) {
                const std::size_t src = order[start + r];
                std::copy_n(bank.features.data.begin() + src * bank.dim(), bank.dim(),
                            batch.features.data.begin() + r * bank.dim());
                batch.labels[r] = bank.labels[src];
            }

            const BatchBounds bounds =
                cfg.global_bounds ? global : batch_bounds(batch.features);

            if (cfg.use_shuffle_loss)
                batch.shuffled_labels = shuffle_labels(batch.labels, gan.class_count, rng);

            if (cfg.use_uniform_loss) {
                const std::size_t k_triv = static_cast<std::size_t>(
                    std::llround(cfg.neg_trivial_ratio * static_cast<double>(n)));
                if (k_triv > 0) {
                    std::vector<NegativePair> trivial =
                        cfg.sampler == NegSampler::gaussian
                            ? gauss.sample(k_triv, cfg.gaussian_q, rng)
                            : sample_uniform(bounds, k_triv, gan.class_count, rng,
                                             cfg.bounds_margin);
                    for (auto& p : trivial) batch.negatives.push_back(std::move(p));
                }
                const std::size_t k_hard = static_cast<std::size_t>(
                    std::llround(cfg.neg_hard_ratio * static_cast<double>(n)));
                if (epoch >= cfg.warmup_epochs && k_hard > 0) {
                    double mean_range = 0.0;
                    for (std::size_t j = 0; j < bounds.dim(); ++j)
                        mean_range += bounds.upper[j] - bounds.lower[j];
                    mean_range /= static_cast<double>(bounds.dim());
                    const double eps_scale = cfg.fgsm_scale_factor * mean_range;

                    std::vector<double> eps(k_hard, 0.0);
                    if (eps_scale > 0.0) {
                        FgsmConfig fcfg;
                        fcfg.epsilon_scale = eps_scale;
                        for (double& e : eps) e = draw_epsilon(fcfg, rng);
                    }
                    const std::vector<int> hard_labels =
                        sample_labels(k_hard, gan.class_count, rng);
                    const Tensor2 z = sample_z(k_hard, gan.z_dim, rng);

                    const bool use_feature_mode =
                        cfg.fgsm_mode == FgsmMode::feature ||
                        (cfg.fgsm_mode == FgsmMode::both && batch_counter % 2 == 0);
                    std::vector<NegativePair> hard;
                    if (use_feature_mode) {
                        const Tensor2 synthetic = forward(
                            gan.g_net, concat_onehot(z, hard_labels, gan.class_count));
                        hard = calibrate_feature_batch(gan.d_net, synthetic, hard_labels,
                                                       gan.class_count, eps);
                    } else {
                        hard = calibrate_noise_batch(gan.g_net, gan.d_net, z, hard_labels,
                                                     gan.class_count, eps);
                    }
                    for (auto& p : hard) batch.negatives.push_back(std::move(p));
                }
            }

            LossBreakdown loss;
            for (std::size_t step = 0; step < std::max<std::size_t>(gan.d_steps, 1); ++step) {
                const LossBreakdown step_loss =
                    discriminator_step(gan, batch, d_adam, cfg, rng);
                if (step == 0) loss = step_loss;
            }

            const ClassFeatureIndex batch_index =
                ClassFeatureIndex::from_batch(batch.features, batch.labels, gan.class_count);
            loss.l_g = generator_step(gan, batch_index, reservoir, n, g_adam, cfg, rng);

            if (!std::isfinite(loss.l_t) || !std::isfinite(loss.l_s) ||
                !std::isfinite(loss.l_u) || !std::isfinite(loss.l_g))
                fail_numeric("train_bal: non-finite loss at epoch " + std::to_string(epoch) +
                             " batch " + std::to_string(start / cfg.batch_size) +
                             " (L_t=" + std::to_string(loss.l_t) +
                             " L_s=" + std::to_string(loss.l_s) +
                             " L_u=" + std::to_string(loss.l_u) +
                             " L_g=" + std::to_string(loss.l_g) + ")");

            log.per_batch.push_back(loss);
            epoch_losses.push_back(loss);
            ++batch_counter;
        }

        LossBreakdown mean;
        for (const LossBreakdown& b : epoch_losses) {
            mean.l_t += b.l_t;
            mean.l_s += b.l_s;
            mean.l_u += b.l_u;
            mean.l_g += b.l_g;
        }
        const double inv = 1.0 / static_cast<double>(epoch_losses.size());
        mean.l_t *= inv;
        mean.l_s *= inv;
        mean.l_u *= inv;
        mean.l_g *= inv;
        mean.l_d = mean.l_t + mean.l_s + mean.l_u;
        log.per_epoch.push_back(mean);
    }
    return log;
}

void write_loss_csv(const TrainLog& log, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail_data("cannot open for write: " + path);
    f << "epoch,l_t,l_s,l_u,l_d,l_g\n";
    char buf[512];
    for (std::size_t e = 0; e < log.per_epoch.size(); ++e) {
        const LossBreakdown& b = log.per_epoch[e];
        std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", e, b.l_t,
                      b.l_s, b.l_u, b.l_d, b.l_g);
        f << buf;
    }
    if (!f) fail_data("write failed: " + path);
}

std::vector<NegativePair> gaussian_sample_ablation(const FeatureBank& bank, std::size_t k,
                                                   std::uint64_t seed, double q) {
    if (!(q > 0.0) || q > 1.0)
        fail_config("gaussian_sample_ablation: q must be in (0, 1]");
    Rng rng(seed);
    return GaussianSampler::fit(bank).sample(k, q, rng);
}

} // namespace bal
