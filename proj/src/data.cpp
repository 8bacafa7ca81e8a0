#include "bal/data.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "bal/error.hpp"
#include "bal/rng.hpp"

namespace bal {

LabeledDataset gen_two_gaussians(std::size_t n_per_class, std::array<double, 2> mean0,
                                 std::array<double, 2> mean1, double sigma,
                                 std::uint64_t seed) {
    if (n_per_class == 0) fail_data("gen_two_gaussians: n_per_class must be positive");
    if (!(sigma > 0.0)) fail_data("gen_two_gaussians: sigma must be positive");
    Rng rng(seed);
    LabeledDataset ds;
    ds.class_count = 2;
    ds.inputs = Tensor2(2 * n_per_class, 2);
    ds.labels.resize(2 * n_per_class);
    for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
        const int label = i < n_per_class ? 0 : 1;
        const auto& mean = label == 0 ? mean0 : mean1;
        ds.inputs(i, 0) = rng.normal(mean[0], sigma);
        ds.inputs(i, 1) = rng.normal(mean[1], sigma);
        ds.labels[i] = label;
    }
    return ds;
}

namespace {

std::uint32_t read_be32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (!f) fail_data("truncated IDX file: " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

} // namespace

LabeledDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgf(images_path, std::ios::binary);
    if (!imgf) fail_data("cannot open IDX image file: " + images_path);
    if (read_be32(imgf, images_path) != kIdxImagesMagic)
        fail_data("bad IDX image magic: " + images_path);
    const std::uint32_t count = read_be32(imgf, images_path);
    const std::uint32_t height = read_be32(imgf, images_path);
    const std::uint32_t width = read_be32(imgf, images_path);

    std::ifstream lblf(labels_path, std::ios::binary);
    if (!lblf) fail_data("cannot open IDX label file: " + labels_path);
    if (read_be32(lblf, labels_path) != kIdxLabelsMagic)
        fail_data("bad IDX label magic: " + labels_path);
    const std::uint32_t label_count = read_be32(lblf, labels_path);
    if (label_count != count)
        fail_data("IDX image/label count mismatch: " + images_path + " has " +
                  std::to_string(count) + ", " + labels_path + " has " +
                  std::to_string(label_count));

    const std::size_t pixels = std::size_t(height) * width;
    LabeledDataset ds;
    ds.inputs = Tensor2(count, pixels);
    ds.labels.resize(count);

    std::vector<unsigned char> buf(pixels);
    for (std::uint32_t i = 0; i < count; ++i) {
        imgf.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
        if (!imgf) fail_data("truncated IDX image data: " + images_path);
        double* row = ds.inputs.data.data() + std::size_t(i) * pixels;
        for (std::size_t j = 0; j < pixels; ++j) row[j] = buf[j] / 255.0;
    }
    int max_label = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        unsigned char l;
        lblf.read(reinterpret_cast<char*>(&l), 1);
        if (!lblf) fail_data("truncated IDX label data: " + labels_path);
        ds.labels[i] = l;
        max_label = std::max(max_label, int(l));
    }
    ds.class_count = max_label + 1;
    return ds;
}

FeatureBank make_bank(Tensor2 features, std::vector<int> labels, int class_count) {
    if (features.rows == 0) fail_data("feature bank must be non-empty");
    if (features.cols == 0) fail_data("feature bank dimension must be positive");
    if (labels.size() != features.rows) fail_data("feature bank: label count != row count");
    FeatureBank bank;
    bank.features = std::move(features);
    bank.labels = std::move(labels);
    bank.class_count = class_count;
    bank.by_class.assign(static_cast<std::size_t>(class_count), {});
    for (std::size_t i = 0; i < bank.labels.size(); ++i) {
        const int c = bank.labels[i];
        if (c < 0 || c >= class_count)
            fail_data("feature bank: label " + std::to_string(c) + " out of range");
        bank.by_class[static_cast<std::size_t>(c)].push_back(i);
    }
    return bank;
}

namespace {

constexpr char kBankMagic[8] = {'B', 'A', 'L', 'F', 'T', 'B', '1', '\0'};

template <typename T>
void write_raw(std::ofstream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& f, const std::string& path) {
    T v;
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) fail_data("truncated feature bank: " + path);
    return v;
}

} // namespace

void save_bank(const FeatureBank& bank, const std::string& path) {
    if (bank.size() == 0) fail_data("save_bank: refusing to save empty bank");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail_data("cannot open for write: " + path);
    f.write(kBankMagic, sizeof(kBankMagic));
    write_raw<std::uint32_t>(f, static_cast<std::uint32_t>(bank.size()));
    write_raw<std::uint32_t>(f, static_cast<std::uint32_t>(bank.dim()));
    write_raw<std::uint32_t>(f, static_cast<std::uint32_t>(bank.class_count));
    f.write(reinterpret_cast<const char*>(bank.features.data.data()),
            static_cast<std::streamsize>(bank.features.data.size() * sizeof(double)));
    for (int l : bank.labels) write_raw<std::uint32_t>(f, static_cast<std::uint32_t>(l));
    if (!f) fail_data("write failed: " + path);
}

FeatureBank load_bank(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail_data("cannot open: " + path);
    char magic[8];
    f.read(magic, sizeof(magic));
    if (!f || std::memcmp(magic, kBankMagic, sizeof(kBankMagic)) != 0)
        fail_data("bad feature bank magic: " + path);
    const auto count = read_raw<std::uint32_t>(f, path);
    const auto dim = read_raw<std::uint32_t>(f, path);
    const auto class_count = read_raw<std::uint32_t>(f, path);
    if (count == 0) fail_data("feature bank is empty: " + path);
    Tensor2 features(count, dim);
    f.read(reinterpret_cast<char*>(features.data.data()),
           static_cast<std::streamsize>(features.data.size() * sizeof(double)));
    if (!f) fail_data("truncated feature bank: " + path);
    std::vector<int> labels(count);
    for (auto& l : labels) l = static_cast<int>(read_raw<std::uint32_t>(f, path));
    return make_bank(std::move(features), std::move(labels), static_cast<int>(class_count));
}

} // namespace bal
