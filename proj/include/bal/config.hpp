#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace bal {

// Flat experiment configuration. Serialized as `key = value` text with `#`
// comments; serialize(parse(serialize(c))) is a fixed point.
struct ExperimentConfig {
    // datasets
    std::string id_dataset = "toy";        // toy | mnist | fmnist
    std::string ood_dataset = "uniform-far"; // uniform-far | mnist | fmnist | toy
    std::string data_dir;                  // falls back to $BAL_DATA_DIR
    std::string out_dir = "out";

    // toy data
    std::size_t toy_n_per_class = 1000;
    double toy_separation = 6.0; // distance between the two class means
    double toy_sigma = 0.5;

    // architecture
    std::size_t feature_dim = 64; // m
    std::vector<std::size_t> cls_hidden = {256};
    std::size_t z_dim = 16;
    std::vector<std::size_t> g_hidden = {128, 128};
    std::vector<std::size_t> d_hidden = {128, 128};

    // classifier training
    std::size_t cls_epochs = 20;
    double cls_lr = 1e-3;
    std::size_t batch_size = 128;

    // BAL training
    std::size_t bal_epochs = 30;
    double d_lr = 2e-4;
    double g_lr = 2e-4;
    std::size_t d_steps = 1; // discriminator steps per generator step
    std::size_t warmup_epochs = 5;
    double lambda_c = 0.7;
    double lambda = 0.01;
    double fgsm_scale = 0.1; // epsilon scale as a fraction of the mean feature range
    std::string fgsm_mode = "both"; // feature | noise | both
    double neg_trivial_ratio = 1.0;
    double neg_hard_ratio = 1.0;
    std::string sampler = "uniform"; // uniform | gaussian
    double gaussian_q = 0.5;
    bool use_shuffle_loss = true;
    bool use_uniform_loss = true;
    double bounds_margin = 0.0;
    bool global_bounds = false;
    bool nonsaturating_g = false;

    // detector
    double gamma = 0.60;
    double odin_temperature = 10.0;
    double odin_epsilon = 5e-4;

    // misc
    std::uint64_t seed = 7;
    std::size_t grid_resolution = 128;
    std::size_t eval_max_per_side = 0; // 0 = no cap; ID/OOD are always balanced
};

std::string serialize_config(const ExperimentConfig& cfg);
// Keys not present in the text keep their values from base.
ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config_file(const std::string& path, ExperimentConfig base = {});

// "256,128" -> {256, 128}; used by the CLI for width lists.
std::vector<std::size_t> parse_size_list(const std::string& text);

// toy | mnist-vs-fmnist | fmnist-vs-mnist
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

} // namespace bal
