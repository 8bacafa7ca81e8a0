// Command line driver for the boundary-aware OOD detection workbench.
//
// Verbs: train-classifier, extract-features, train-bal, eval, grid, ablate.
// Option precedence: built-in defaults < --preset < --config file < flags.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "bal/error.hpp"
#include "bal/experiment.hpp"

namespace {

// --preset/--config must take effect before the per-field flags are bound, so
// they are pulled out of argv ahead of the CLI11 parse.
std::string prescan(int argc, char** argv, const std::string& name) {
    const std::string eq = name + "=";
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == name && i + 1 < argc) return argv[i + 1];
        if (arg.rfind(eq, 0) == 0) return arg.substr(eq.size());
    }
    return "";
}

void print_report(const bal::EvalOutcome& outcome) {
    std::cout << bal::format_report_table(outcome.rows, outcome.cls_test_accuracy);
    std::cout << "(n = " << outcome.n_per_side << " per side)\n";
}

} // namespace

int main(int argc, char** argv) {
    bal::ExperimentConfig cfg;
    try {
        const std::string preset = prescan(argc, argv, "--preset");
        if (!preset.empty()) cfg = bal::preset_config(preset);
        const std::string config_path = prescan(argc, argv, "--config");
        if (!config_path.empty()) cfg = bal::load_config_file(config_path, cfg);
    } catch (const bal::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    }

    CLI::App app{"Boundary-aware OOD detection workbench"};
    app.require_subcommand(1);

    std::string preset_opt, config_opt;
    app.add_option("--preset", preset_opt, "preset: toy, mnist-vs-fmnist, fmnist-vs-mnist");
    app.add_option("--config", config_opt, "key = value config file");

    std::string cls_hidden_opt, g_hidden_opt, d_hidden_opt;
    app.add_option("--id-dataset", cfg.id_dataset, "ID dataset: toy, mnist, fmnist");
    app.add_option("--ood-dataset", cfg.ood_dataset,
                   "OOD dataset: uniform-far, mnist, fmnist");
    app.add_option("--data-dir", cfg.data_dir, "dataset root (default $BAL_DATA_DIR)");
    app.add_option("--out-dir", cfg.out_dir, "artifact directory");
    app.add_option("--toy-n-per-class", cfg.toy_n_per_class);
    app.add_option("--toy-separation", cfg.toy_separation);
    app.add_option("--toy-sigma", cfg.toy_sigma);
    app.add_option("--feature-dim", cfg.feature_dim, "penultimate width m");
    app.add_option("--cls-hidden", cls_hidden_opt, "classifier hidden widths, e.g. 256");
    app.add_option("--z-dim", cfg.z_dim);
    app.add_option("--g-hidden", g_hidden_opt, "generator hidden widths, e.g. 128,128");
    app.add_option("--d-hidden", d_hidden_opt, "discriminator hidden widths");
    app.add_option("--cls-epochs", cfg.cls_epochs);
    app.add_option("--cls-lr", cfg.cls_lr);
    app.add_option("--batch-size", cfg.batch_size);
    app.add_option("--bal-epochs", cfg.bal_epochs);
    app.add_option("--d-lr", cfg.d_lr);
    app.add_option("--g-lr", cfg.g_lr);
    app.add_option("--d-steps", cfg.d_steps, "discriminator steps per generator step");
    app.add_option("--warmup-epochs", cfg.warmup_epochs, "epochs before FGSM negatives");
    app.add_option("--lambda-c", cfg.lambda_c, "uniform-loss conflict weight");
    app.add_option("--lambda", cfg.lambda, "generator L1 regularizer weight");
    app.add_option("--fgsm-scale", cfg.fgsm_scale, "FGSM step scale, fraction of range");
    app.add_option("--fgsm-mode", cfg.fgsm_mode, "feature, noise or both");
    app.add_option("--neg-trivial-ratio", cfg.neg_trivial_ratio);
    app.add_option("--neg-hard-ratio", cfg.neg_hard_ratio);
    app.add_option("--sampler", cfg.sampler, "trivial negatives: uniform or gaussian");
    app.add_option("--gaussian-q", cfg.gaussian_q);
    app.add_option("--use-shuffle-loss", cfg.use_shuffle_loss);
    app.add_option("--use-uniform-loss", cfg.use_uniform_loss);
    app.add_option("--bounds-margin", cfg.bounds_margin);
    app.add_option("--global-bounds", cfg.global_bounds);
    app.add_option("--nonsaturating-g", cfg.nonsaturating_g);
    app.add_option("--gamma", cfg.gamma, "accept threshold on p1*p2");
    app.add_option("--odin-temperature", cfg.odin_temperature);
    app.add_option("--odin-epsilon", cfg.odin_epsilon);
    app.add_option("--seed", cfg.seed);
    app.add_option("--grid-resolution", cfg.grid_resolution);
    app.add_option("--eval-max-per-side", cfg.eval_max_per_side,
                   "cap eval set size per side (0 = full)");

    CLI::App* cmd_train_cls =
        app.add_subcommand("train-classifier", "train and freeze the classifier");
    CLI::App* cmd_extract =
        app.add_subcommand("extract-features", "write the penultimate feature bank");
    CLI::App* cmd_train_bal =
        app.add_subcommand("train-bal", "adversarially train the boundary discriminator");
    CLI::App* cmd_eval =
        app.add_subcommand("eval", "score ID/OOD sets with bal, max-softmax and odin");
    CLI::App* cmd_grid =
        app.add_subcommand("grid", "emit 2D confidence rasters and OOD overlays");
    CLI::App* cmd_ablate = app.add_subcommand("ablate", "loss/lambda_c/sampler sweeps");

    std::string study = "losses";
    std::size_t n_seeds = 3;
    cmd_ablate->add_option("--study", study, "losses, lambda_c or sampler");
    cmd_ablate->add_option("--seeds", n_seeds, "seeds per variant");

    for (CLI::App* sub : {cmd_train_cls, cmd_extract, cmd_train_bal, cmd_eval, cmd_grid,
                          cmd_ablate})
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (!cls_hidden_opt.empty()) cfg.cls_hidden = bal::parse_size_list(cls_hidden_opt);
        if (!g_hidden_opt.empty()) cfg.g_hidden = bal::parse_size_list(g_hidden_opt);
        if (!d_hidden_opt.empty()) cfg.d_hidden = bal::parse_size_list(d_hidden_opt);

        if (cmd_train_cls->parsed()) {
            const bal::TrainClassifierOutcome outcome = bal::run_train_classifier(cfg);
            std::printf("classifier saved: %s\n", outcome.checkpoint_stem.c_str());
            std::printf("train accuracy: %.4f\ntest accuracy: %.4f\n",
                        outcome.train_accuracy, outcome.test_accuracy);
        } else if (cmd_extract->parsed()) {
            const std::string bank = bal::run_extract_features(cfg);
            std::printf("feature bank saved: %s\n", bank.c_str());
        } else if (cmd_train_bal->parsed()) {
            const bal::TrainBalOutcome outcome = bal::run_train_bal(cfg);
            std::printf("gan saved: %s\nloss log: %s\n", outcome.gan_stem.c_str(),
                        outcome.loss_csv.c_str());
            if (!outcome.log.per_epoch.empty()) {
                const bal::LossBreakdown& last = outcome.log.per_epoch.back();
                std::printf("final epoch: L_t=%.4f L_s=%.4f L_u=%.4f L_d=%.4f L_g=%.4f\n",
                            last.l_t, last.l_s, last.l_u, last.l_d, last.l_g);
            }
        } else if (cmd_eval->parsed()) {
            print_report(bal::run_eval(cfg));
        } else if (cmd_grid->parsed()) {
            const bal::GridOutcome outcome = bal::run_grid(cfg);
            const bal::OutPaths paths = bal::out_paths(cfg);
            std::printf("rasters: %s %s %s\n", paths.grid_pgm("p1").c_str(),
                        paths.grid_pgm("p2").c_str(), paths.grid_pgm("p1p2").c_str());
            std::printf("far-field mean score: max-softmax %.4f, bal %.4f (%zu cells)\n",
                        outcome.mean_far_field_p1, outcome.mean_far_field_p1p2,
                        outcome.far_field_cells);
        } else if (cmd_ablate->parsed()) {
            const bal::AblateOutcome outcome = bal::run_ablate(cfg, study, n_seeds);
            const bal::OutPaths paths = bal::out_paths(cfg);
            std::printf("ablation written: %s\n", paths.ablate_csv(study).c_str());
            for (const bal::AblateRow& row : outcome.rows)
                std::printf("%-10s seed=%llu  FPR95=%6.2f  AUROC=%6.2f\n",
                            row.variant.c_str(),
                            static_cast<unsigned long long>(row.seed),
                            100.0 * row.metrics.fpr95, 100.0 * row.metrics.auroc);
        }
    } catch (const bal::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
