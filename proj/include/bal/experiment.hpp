#pragma once

#include <string>
#include <vector>

#include "bal/classifier.hpp"
#include "bal/config.hpp"
#include "bal/data.hpp"
#include "bal/detector.hpp"
#include "bal/metrics.hpp"
#include "bal/rdm.hpp"

namespace bal {

// Artifact layout under config.out_dir.
struct OutPaths {
    std::string dir;

    std::string classifier_stem() const { return dir + "/classifier"; }
    std::string bank_path() const { return dir + "/features.balftb"; }
    std::string gan_stem() const { return dir + "/gan"; }
    std::string loss_csv() const { return dir + "/bal_losses.csv"; }
    std::string scores_csv() const { return dir + "/scores.csv"; }
    std::string report_csv() const { return dir + "/report.csv"; }
    std::string report_txt() const { return dir + "/report.txt"; }
    std::string grid_csv() const { return dir + "/grid.csv"; }
    std::string grid_pgm(const std::string& channel) const {
        return dir + "/grid_" + channel + ".pgm";
    }
    std::string grid_trivial_csv() const { return dir + "/grid_trivial_ood.csv"; }
    std::string grid_hard_csv() const { return dir + "/grid_hard_ood.csv"; }
    std::string ablate_csv(const std::string& study) const {
        return dir + "/ablate_" + study + ".csv";
    }
};

OutPaths out_paths(const ExperimentConfig& cfg);

// data_dir from the config, falling back to $BAL_DATA_DIR.
std::string resolve_data_dir(const ExperimentConfig& cfg);

LabeledDataset load_dataset(const ExperimentConfig& cfg, const std::string& name,
                            Split split);

// Balanced ID/OOD evaluation inputs (|ID| == |OOD|), deterministic under the
// config seed. "uniform-far" OOD draws uniform points in the 50%-expanded toy
// data box, at least 3 sigma away from both class means.
struct EvalSets {
    Tensor2 id_inputs;
    Tensor2 ood_inputs;
};
EvalSets build_eval_sets(const ExperimentConfig& cfg);

BalTrainConfig bal_train_config(const ExperimentConfig& cfg);

struct TrainClassifierOutcome {
    std::string checkpoint_stem;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};
TrainClassifierOutcome run_train_classifier(const ExperimentConfig& cfg);

std::string run_extract_features(const ExperimentConfig& cfg); // returns bank path

struct TrainBalOutcome {
    std::string gan_stem;
    std::string loss_csv;
    TrainLog log;
};
TrainBalOutcome run_train_bal(const ExperimentConfig& cfg);

struct EvalOutcome {
    std::vector<DetectorReportRow> rows; // bal, max-softmax, odin
    double cls_test_accuracy = 0.0;
    std::size_t n_per_side = 0;

    const MetricsReport& metrics_for(const std::string& detector) const;
};
EvalOutcome run_eval(const ExperimentConfig& cfg);

struct GridOutcome {
    std::size_t resolution = 0;
    double mean_far_field_p1 = 0.0;    // max-softmax score over far-field cells
    double mean_far_field_p1p2 = 0.0;  // BAL score over the same cells
    std::size_t far_field_cells = 0;
};
GridOutcome run_grid(const ExperimentConfig& cfg);

struct AblateRow {
    std::string variant; // loss combo, lambda_c value, or sampler name
    std::uint64_t seed = 0;
    MetricsReport metrics;
};
struct AblateOutcome {
    std::string study;
    std::vector<AblateRow> rows;

    MetricsReport mean_for(const std::string& variant) const;
};
// study: "losses" (L_t / L_t+L_s / L_t+L_u / L_t+L_s+L_u), "lambda_c"
// (0.1..0.9), or "sampler" (uniform vs gaussian). Requires classifier and bank
// artifacts; trains one GAN per variant and seed.
AblateOutcome run_ablate(const ExperimentConfig& cfg, const std::string& study,
                         std::size_t n_seeds);

} // namespace bal
