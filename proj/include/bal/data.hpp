#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bal/tensor.hpp"

namespace bal {

enum class Split { train, test };

struct LabeledDataset {
    Tensor2 inputs;          // one row per sample; pixels in [0,1] or raw 2D coords
    std::vector<int> labels; // in [0, class_count)
    int class_count = 0;
    Split split = Split::train;

    std::size_t size() const { return inputs.rows; }
};

// Two isotropic Gaussian blobs in 2D, labels 0/1, deterministic under seed.
LabeledDataset gen_two_gaussians(std::size_t n_per_class, std::array<double, 2> mean0,
                                 std::array<double, 2> mean1, double sigma,
                                 std::uint64_t seed);

// IDX files as distributed for MNIST-style datasets: big-endian dimensions,
// magic 0x00000803 for images and 0x00000801 for labels. Pixels come back
// scaled to [0,1] with each image flattened to one row.
LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path);

struct FeatureBank {
    Tensor2 features; // n x m
    std::vector<int> labels;
    int class_count = 0;
    std::vector<std::vector<std::size_t>> by_class; // row indices per class

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
};

// Validates labels and builds the per-class index.
FeatureBank make_bank(Tensor2 features, std::vector<int> labels, int class_count);

// Bank file format, little-endian: magic "BALFTB1\0", u32 count, u32 dim,
// u32 class_count, f64 features row-major, u32 labels. Bit-exact round trip.
void save_bank(const FeatureBank& bank, const std::string& path);
FeatureBank load_bank(const std::string& path);

} // namespace bal
