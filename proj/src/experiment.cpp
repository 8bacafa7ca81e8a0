#include "bal/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "bal/error.hpp"
#include "bal/loss.hpp"
#include "bal/rem.hpp"
#include "bal/rsm.hpp"

namespace fs = std::filesystem;

namespace bal {

OutPaths out_paths(const ExperimentConfig& cfg) {
    OutPaths p;
    p.dir = cfg.out_dir.empty() ? std::string(".") : cfg.out_dir;
    return p;
}

std::string resolve_data_dir(const ExperimentConfig& cfg) {
    if (!cfg.data_dir.empty()) return cfg.data_dir;
    if (const char* env = std::getenv("BAL_DATA_DIR"); env && *env) return env;
    fail_data("no dataset directory: set data_dir in the config or export BAL_DATA_DIR");
}

namespace {

std::array<double, 2> toy_mean0(const ExperimentConfig& cfg) {
    return {-cfg.toy_separation / 2.0, 0.0};
}
std::array<double, 2> toy_mean1(const ExperimentConfig& cfg) {
    return {cfg.toy_separation / 2.0, 0.0};
}

std::uint64_t split_seed(const ExperimentConfig& cfg, Split split) {
    return split == Split::train ? cfg.seed : cfg.seed + 1000003;
}

} // namespace

LabeledDataset load_dataset(const ExperimentConfig& cfg, const std::string& name,
                            Split split) {
    if (name == "toy") {
        LabeledDataset ds = gen_two_gaussians(cfg.toy_n_per_class, toy_mean0(cfg),
                                              toy_mean1(cfg), cfg.toy_sigma,
                                              split_seed(cfg, split));
        ds.split = split;
        return ds;
    }
    std::string subdir;
    if (name == "mnist") subdir = "mnist";
    else if (name == "fmnist") subdir = "fashion-mnist";
    else fail_config("unknown dataset: " + name + " (expected toy, mnist or fmnist)");

    const std::string base = resolve_data_dir(cfg) + "/" + subdir + "/";
    const std::string prefix = split == Split::train ? "train" : "t10k";
    LabeledDataset ds = load_idx(base + prefix + "-images-idx3-ubyte",
                                 base + prefix + "-labels-idx1-ubyte");
    ds.split = split;
    return ds;
}

namespace {

// Bounding box of the rows, each side stretched by `factor` around the center.
struct Box2 {
    double x0, x1, y0, y1;
};

Box2 expanded_box(const Tensor2& points, double factor) {
    const BatchBounds b = batch_bounds(points);
    Box2 box{b.lower[0], b.upper[0], b.lower[1], b.upper[1]};
    const double cx = 0.5 * (box.x0 + box.x1), cy = 0.5 * (box.y0 + box.y1);
    const double hx = 0.5 * (box.x1 - box.x0) * factor;
    const double hy = 0.5 * (box.y1 - box.y0) * factor;
    return {cx - hx, cx + hx, cy - hy, cy + hy};
}

bool far_from_toy_means(const ExperimentConfig& cfg, double x, double y) {
    const auto m0 = toy_mean0(cfg), m1 = toy_mean1(cfg);
    const double r = 3.0 * cfg.toy_sigma;
    const double d0 = std::hypot(x - m0[0], y - m0[1]);
    const double d1 = std::hypot(x - m1[0], y - m1[1]);
    return d0 > r && d1 > r;
}

Tensor2 sample_far_field(const ExperimentConfig& cfg, std::size_t n, Rng& rng) {
    const LabeledDataset train = load_dataset(cfg, "toy", Split::train);
    const Box2 box = expanded_box(train.inputs, 1.5);
    Tensor2 out(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        double x, y;
        do {
            x = rng.uniform(box.x0, box.x1);
            y = rng.uniform(box.y0, box.y1);
        } while (!far_from_toy_means(cfg, x, y));
        out(i, 0) = x;
        out(i, 1) = y;
    }
    return out;
}

Tensor2 subsample_rows(const Tensor2& inputs, std::size_t n, Rng& rng) {
    std::vector<std::size_t> idx(inputs.rows);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(rng.uniform_int(static_cast<int>(idx.size() - i)));
        std::swap(idx[i], idx[j]);
    }
    Tensor2 out(n, inputs.cols);
    for (std::size_t i = 0; i < n; ++i)
        std::copy_n(inputs.data.begin() + idx[i] * inputs.cols, inputs.cols,
                    out.data.begin() + i * inputs.cols);
    return out;
}

} // namespace

EvalSets build_eval_sets(const ExperimentConfig& cfg) {
    const LabeledDataset id_test = load_dataset(cfg, cfg.id_dataset, Split::test);
    Rng rng(cfg.seed + 8803);

    EvalSets sets;
    if (cfg.ood_dataset == "uniform-far") {
        if (cfg.id_dataset != "toy")
            fail_config("uniform-far OOD requires the toy ID dataset");
        std::size_t n = id_test.size();
        if (cfg.eval_max_per_side > 0) n = std::min(n, cfg.eval_max_per_side);
        sets.id_inputs = subsample_rows(id_test.inputs, n, rng);
        sets.ood_inputs = sample_far_field(cfg, n, rng);
        return sets;
    }

    const LabeledDataset ood_test = load_dataset(cfg, cfg.ood_dataset, Split::test);
    std::size_t n = std::min(id_test.size(), ood_test.size());
    if (cfg.eval_max_per_side > 0) n = std::min(n, cfg.eval_max_per_side);
    // quantity of ID and OOD examples kept strictly the same
    sets.id_inputs = subsample_rows(id_test.inputs, n, rng);
    sets.ood_inputs = subsample_rows(ood_test.inputs, n, rng);
    return sets;
}

BalTrainConfig bal_train_config(const ExperimentConfig& cfg) {
    BalTrainConfig t;
    t.epochs = cfg.bal_epochs;
    t.batch_size = cfg.batch_size;
    t.d_lr = cfg.d_lr;
    t.g_lr = cfg.g_lr;
    t.seed = cfg.seed + 4241;
    t.use_shuffle_loss = cfg.use_shuffle_loss;
    t.use_uniform_loss = cfg.use_uniform_loss;
    t.neg_trivial_ratio = cfg.neg_trivial_ratio;
    t.neg_hard_ratio = cfg.neg_hard_ratio;
    if (cfg.sampler == "uniform") t.sampler = NegSampler::uniform;
    else if (cfg.sampler == "gaussian") t.sampler = NegSampler::gaussian;
    else fail_config("unknown sampler: " + cfg.sampler);
    t.gaussian_q = cfg.gaussian_q;
    t.bounds_margin = cfg.bounds_margin;
    t.global_bounds = cfg.global_bounds;
    t.fgsm_scale_factor = cfg.fgsm_scale;
    if (cfg.fgsm_mode == "feature") t.fgsm_mode = FgsmMode::feature;
    else if (cfg.fgsm_mode == "noise") t.fgsm_mode = FgsmMode::noise;
    else if (cfg.fgsm_mode == "both") t.fgsm_mode = FgsmMode::both;
    else fail_config("unknown fgsm_mode: " + cfg.fgsm_mode);
    t.warmup_epochs = cfg.warmup_epochs;
    t.nonsaturating_g = cfg.nonsaturating_g;
    return t;
}

TrainClassifierOutcome run_train_classifier(const ExperimentConfig& cfg) {
    const OutPaths paths = out_paths(cfg);
    fs::create_directories(paths.dir);
    const LabeledDataset train = load_dataset(cfg, cfg.id_dataset, Split::train);
    const LabeledDataset test = load_dataset(cfg, cfg.id_dataset, Split::test);

    ClassifierArch arch;
    arch.hidden = cfg.cls_hidden;
    arch.feature_dim = cfg.feature_dim;
    const Classifier cls = train_classifier(train, &test, arch, cfg.cls_epochs, cfg.cls_lr,
                                            cfg.batch_size, cfg.seed);
    cls.save(paths.classifier_stem());

    TrainClassifierOutcome outcome;
    outcome.checkpoint_stem = paths.classifier_stem();
    outcome.train_accuracy = cls.meta().train_accuracy;
    outcome.test_accuracy = cls.meta().test_accuracy;
    return outcome;
}

std::string run_extract_features(const ExperimentConfig& cfg) {
    const OutPaths paths = out_paths(cfg);
    fs::create_directories(paths.dir);
    const Classifier cls = Classifier::load(paths.classifier_stem());
    const LabeledDataset train = load_dataset(cfg, cfg.id_dataset, Split::train);
    const FeatureBank bank = extract_features(cls, train);
    save_bank(bank, paths.bank_path());
    return paths.bank_path();
}

TrainBalOutcome run_train_bal(const ExperimentConfig& cfg) {
    const OutPaths paths = out_paths(cfg);
    fs::create_directories(paths.dir);
    const FeatureBank bank = load_bank(paths.bank_path());

    CondGan gan = make_cond_gan(bank.dim(), bank.class_count, cfg.z_dim, cfg.g_hidden,
                                cfg.d_hidden, cfg.seed + 101);
    gan.lambda_c = cfg.lambda_c;
    gan.lambda = cfg.lambda;
    gan.d_steps = cfg.d_steps;

    TrainBalOutcome outcome;
    outcome.log = train_bal(gan, bank, bal_train_config(cfg));
    save_gan(gan, paths.gan_stem());
    write_loss_csv(outcome.log, paths.loss_csv());
    outcome.gan_stem = paths.gan_stem();
    outcome.loss_csv = paths.loss_csv();
    return outcome;
}

const MetricsReport& EvalOutcome::metrics_for(const std::string& detector) const {
    for (const DetectorReportRow& row : rows)
        if (row.detector == detector) return row.metrics;
    fail_data("no detector row: " + detector);
}

EvalOutcome run_eval(const ExperimentConfig& cfg) {
    const OutPaths paths = out_paths(cfg);
    fs::create_directories(paths.dir);
    const Classifier cls = Classifier::load(paths.classifier_stem());
    const CondGan gan = load_gan(paths.gan_stem());
    const EvalSets sets = build_eval_sets(cfg);

    std::vector<ScoredSample> all;
    EvalOutcome outcome;
    outcome.n_per_side = sets.id_inputs.rows;
    outcome.cls_test_accuracy = cls.meta().test_accuracy;

    const auto add = [&](std::vector<ScoredSample> id_part,
                         std::vector<ScoredSample> ood_part, const char* name) {
        const std::vector<double> id_scores = scores_of(id_part);
        const std::vector<double> ood_scores = scores_of(ood_part);
        outcome.rows.push_back({name, evaluate_scores(id_scores, ood_scores)});
        for (auto& s : id_part) all.push_back(std::move(s));
        for (auto& s : ood_part) all.push_back(std::move(s));
    };

    add(score_bal(cls, gan.d_net, sets.id_inputs, true),
        score_bal(cls, gan.d_net, sets.ood_inputs, false), "bal");
    add(score_max_softmax(cls, sets.id_inputs, true),
        score_max_softmax(cls, sets.ood_inputs, false), "max-softmax");
    add(score_odin(cls, sets.id_inputs, cfg.odin_temperature, cfg.odin_epsilon, true),
        score_odin(cls, sets.ood_inputs, cfg.odin_temperature, cfg.odin_epsilon, false),
        "odin");

    write_scores_csv(all, paths.scores_csv());
    write_report_csv(outcome.rows, outcome.cls_test_accuracy, paths.report_csv());
    std::ofstream txt(paths.report_txt(), std::ios::trunc);
    if (!txt) fail_data("cannot open for write: " + paths.report_txt());
    txt << format_report_table(outcome.rows, outcome.cls_test_accuracy);
    return outcome;
}

namespace {

void write_pgm(const std::string& path, std::size_t res,
               const std::vector<double>& values) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail_data("cannot open for write: " + path);
    f << "P5\n" << res << " " << res << "\n255\n";
    std::vector<unsigned char> bytes(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        bytes[i] = static_cast<unsigned char>(
            std::lround(255.0 * std::clamp(values[i], 0.0, 1.0)));
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) fail_data("write failed: " + path);
}

void write_points_csv(const std::string& path, std::span<const NegativePair> pairs) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail_data("cannot open for write: " + path);
    f << "x,y,label,origin\n";
    char buf[256];
    for (const NegativePair& p : pairs) {
        const char* origin = p.origin == NegOrigin::trivial_uniform ? "trivial-uniform"
                             : p.origin == NegOrigin::hard_fgsm_feature ? "hard-fgsm-feature"
                             : p.origin == NegOrigin::hard_fgsm_noise ? "hard-fgsm-noise"
                                                                      : "shuffled";
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d,%s\n", p.feature[0], p.feature[1],
                      p.label, origin);
        f << buf;
    }
    if (!f) fail_data("write failed: " + path);
}

} // namespace

GridOutcome run_grid(const ExperimentConfig& cfg) {
    const OutPaths paths = out_paths(cfg);
    fs::create_directories(paths.dir);
    const Classifier cls = Classifier::load(paths.classifier_stem());
    const CondGan gan = load_gan(paths.gan_stem());
    if (cls.backbone().input_width() != 2 || cls.feature_dim() != 2)
        fail_config("grid requires the 2D toy setup (2 inputs, feature_dim 2)");

    const LabeledDataset train = load_dataset(cfg, cfg.id_dataset, Split::train);
    const Box2 box = expanded_box(train.inputs, 1.5);
    const std::size_t res = cfg.grid_resolution;
    if (res < 2) fail_config("grid_resolution must be at least 2");

    const double dx = (box.x1 - box.x0) / static_cast<double>(res);
    const double dy = (box.y1 - box.y0) / static_cast<double>(res);

    // row 0 of the rasters is the top of the box (max y)
    Tensor2 grid_inputs(res * res, 2);
    for (std::size_t r = 0; r < res; ++r) {
        const double y = box.y1 - (static_cast<double>(r) + 0.5) * dy;
        for (std::size_t c = 0; c < res; ++c) {
            const double x = box.x0 + (static_cast<double>(c) + 0.5) * dx;
            grid_inputs(r * res + c, 0) = x;
            grid_inputs(r * res + c, 1) = y;
        }
    }

    const std::vector<ScoredSample> scored = score_bal(cls, gan.d_net, grid_inputs, false);

    std::vector<double> p1(res * res), p2(res * res), p1p2(res * res);
    for (std::size_t i = 0; i < scored.size(); ++i) {
        p1[i] = scored[i].p1;
        p2[i] = *scored[i].p2;
        p1p2[i] = scored[i].score;
    }

    std::ofstream csv(paths.grid_csv(), std::ios::trunc);
    if (!csv) fail_data("cannot open for write: " + paths.grid_csv());
    csv << "x,y,p1,p2,p1p2\n";
    char buf[256];
    for (std::size_t i = 0; i < scored.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      grid_inputs(i, 0), grid_inputs(i, 1), p1[i], p2[i], p1p2[i]);
        csv << buf;
    }

    write_pgm(paths.grid_pgm("p1"), res, p1);
    write_pgm(paths.grid_pgm("p2"), res, p2);
    write_pgm(paths.grid_pgm("p1p2"), res, p1p2);

    // Figure-6 style overlays: trivial box samples over the ID feature bounds
    // and hard FGSM samples from the trained pair.
    Rng rng(cfg.seed + 515);
    const FeatureBank bank = load_bank(paths.bank_path());
    const BatchBounds feature_bounds = batch_bounds(bank.features);
    const std::size_t k = 512;
    const std::vector<NegativePair> trivial =
        sample_uniform(feature_bounds, k, bank.class_count, rng, cfg.bounds_margin);
    write_points_csv(paths.grid_trivial_csv(), trivial);

    double mean_range = 0.0;
    for (std::size_t j = 0; j < feature_bounds.dim(); ++j)
        mean_range += feature_bounds.upper[j] - feature_bounds.lower[j];
    mean_range /= static_cast<double>(feature_bounds.dim());
    FgsmConfig fcfg;
    fcfg.epsilon_scale = std::max(cfg.fgsm_scale * mean_range, 1e-12);
    std::vector<NegativePair> hard;
    {
        Tensor2 z(k, gan.z_dim);
        for (double& v : z.data) v = rng.normal();
        std::vector<int> labels(k);
        for (int& l : labels) l = rng.uniform_int(gan.class_count);
        std::vector<double> eps(k);
        for (double& e : eps) e = draw_epsilon(fcfg, rng);
        const std::size_t half = k / 2;
        Tensor2 z_a(half, gan.z_dim), z_b(k - half, gan.z_dim);
        std::copy_n(z.data.begin(), half * gan.z_dim, z_a.data.begin());
        std::copy_n(z.data.begin() + half * gan.z_dim, (k - half) * gan.z_dim,
                    z_b.data.begin());
        const std::vector<int> labels_a(labels.begin(), labels.begin() + half);
        const std::vector<int> labels_b(labels.begin() + half, labels.end());
        const std::vector<double> eps_a(eps.begin(), eps.begin() + half);
        const std::vector<double> eps_b(eps.begin() + half, eps.end());
        const Tensor2 synthetic =
            forward(gan.g_net, concat_onehot(z_a, labels_a, gan.class_count));
        hard = calibrate_feature_batch(gan.d_net, synthetic, labels_a, gan.class_count,
                                       eps_a);
        std::vector<NegativePair> noise_side = calibrate_noise_batch(
            gan.g_net, gan.d_net, z_b, labels_b, gan.class_count, eps_b);
        for (auto& p : noise_side) hard.push_back(std::move(p));
    }
    write_points_csv(paths.grid_hard_csv(), hard);

    GridOutcome outcome;
    outcome.resolution = res;
    double far_p1 = 0.0, far_p1p2 = 0.0;
    std::size_t far_n = 0;
    for (std::size_t i = 0; i < scored.size(); ++i) {
        if (far_from_toy_means(cfg, grid_inputs(i, 0), grid_inputs(i, 1))) {
            far_p1 += p1[i];
            far_p1p2 += p1p2[i];
            ++far_n;
        }
    }
    outcome.far_field_cells = far_n;
    if (far_n > 0) {
        outcome.mean_far_field_p1 = far_p1 / static_cast<double>(far_n);
        outcome.mean_far_field_p1p2 = far_p1p2 / static_cast<double>(far_n);
    }
    return outcome;
}

MetricsReport AblateOutcome::mean_for(const std::string& variant) const {
    MetricsReport mean;
    std::size_t n = 0;
    for (const AblateRow& row : rows) {
        if (row.variant != variant) continue;
        mean.fpr95 += row.metrics.fpr95;
        mean.det_err += row.metrics.det_err;
        mean.auroc += row.metrics.auroc;
        mean.aupr_in += row.metrics.aupr_in;
        mean.aupr_out += row.metrics.aupr_out;
        mean.n_id = row.metrics.n_id;
        mean.n_ood = row.metrics.n_ood;
        ++n;
    }
    if (n == 0) fail_data("no ablation rows for variant: " + variant);
    const double inv = 1.0 / static_cast<double>(n);
    mean.fpr95 *= inv;
    mean.det_err *= inv;
    mean.auroc *= inv;
    mean.aupr_in *= inv;
    mean.aupr_out *= inv;
    return mean;
}

AblateOutcome run_ablate(const ExperimentConfig& cfg, const std::string& study,
                         std::size_t n_seeds) {
    if (n_seeds == 0) fail_config("run_ablate: need at least one seed");
    const OutPaths paths = out_paths(cfg);
    fs::create_directories(paths.dir);
    const Classifier cls = Classifier::load(paths.classifier_stem());
    const FeatureBank bank = load_bank(paths.bank_path());
    const EvalSets sets = build_eval_sets(cfg);

    AblateOutcome outcome;
    outcome.study = study;

    struct Variant {
        std::string name;
        ExperimentConfig cfg;
    };
    std::vector<Variant> variants;
    if (study == "losses") {
        const std::pair<const char*, std::pair<bool, bool>> combos[] = {
            {"Lt", {false, false}},
            {"Lt+Ls", {true, false}},
            {"Lt+Lu", {false, true}},
            {"Lt+Ls+Lu", {true, true}},
        };
        for (const auto& [name, flags] : combos) {
            ExperimentConfig c = cfg;
            c.use_shuffle_loss = flags.first;
            c.use_uniform_loss = flags.second;
            variants.push_back({name, c});
        }
    } else if (study == "lambda_c") {
        for (double lc : {0.1, 0.3, 0.5, 0.7, 0.9}) {
            ExperimentConfig c = cfg;
            c.lambda_c = lc;
            char name[32];
            std::snprintf(name, sizeof(name), "%.1f", lc);
            variants.push_back({name, c});
        }
    } else if (study == "sampler") {
        for (const char* s : {"uniform", "gaussian"}) {
            ExperimentConfig c = cfg;
            c.sampler = s;
            variants.push_back({s, c});
        }
    } else {
        fail_config("unknown ablation study: " + study +
                    " (expected losses, lambda_c or sampler)");
    }

    for (const Variant& variant : variants) {
        for (std::size_t s = 0; s < n_seeds; ++s) {
            ExperimentConfig c = variant.cfg;
            c.seed = cfg.seed + s;
            CondGan gan = make_cond_gan(bank.dim(), bank.class_count, c.z_dim, c.g_hidden,
                                        c.d_hidden, c.seed + 101);
            gan.lambda_c = c.lambda_c;
            gan.lambda = c.lambda;
            gan.d_steps = c.d_steps;
            train_bal(gan, bank, bal_train_config(c));

            const std::vector<ScoredSample> id_scores =
                score_bal(cls, gan.d_net, sets.id_inputs, true);
            const std::vector<ScoredSample> ood_scores =
                score_bal(cls, gan.d_net, sets.ood_inputs, false);
            AblateRow row;
            row.variant = variant.name;
            row.seed = c.seed;
            row.metrics = evaluate_scores(scores_of(id_scores), scores_of(ood_scores));
            outcome.rows.push_back(std::move(row));
        }
    }

    std::ofstream f(paths.ablate_csv(study), std::ios::trunc);
    if (!f) fail_data("cannot open for write: " + paths.ablate_csv(study));
    f << "variant,seed,det_err,fpr95,auroc,aupr_in,aupr_out\n";
    char buf[512];
    for (const AblateRow& row : outcome.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%llu,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      row.variant.c_str(), static_cast<unsigned long long>(row.seed),
                      row.metrics.det_err, row.metrics.fpr95, row.metrics.auroc,
                      row.metrics.aupr_in, row.metrics.aupr_out);
        f << buf;
    }
    for (const Variant& variant : variants) {
        const MetricsReport mean = outcome.mean_for(variant.name);
        std::snprintf(buf, sizeof(buf), "%s,mean,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      variant.name.c_str(), mean.det_err, mean.fpr95, mean.auroc,
                      mean.aupr_in, mean.aupr_out);
        f << buf;
    }
    if (!f) fail_data("write failed: " + paths.ablate_csv(study));
    return outcome;
}

} // namespace bal
