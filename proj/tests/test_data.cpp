#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "bal/data.hpp"
#include "bal/error.hpp"
#include "bal/rng.hpp"
#include "doctest.h"

using namespace bal;

namespace fs = std::filesystem;

TEST_CASE("two gaussians: vanishing sigma collapses onto the means") {
    const LabeledDataset ds = gen_two_gaussians(1, {-3.0, 0.0}, {3.0, 1.0}, 1e-15, 5);
    REQUIRE(ds.size() == 2);
    CHECK(ds.inputs(0, 0) == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(ds.inputs(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(ds.inputs(1, 0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(ds.inputs(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ds.labels[0] == 0);
    CHECK(ds.labels[1] == 1);
}

TEST_CASE("two gaussians: class means obey the law of large numbers") {
    const std::size_t n = 4000;
    const double sigma = 0.7;
    const LabeledDataset ds = gen_two_gaussians(n, {-2.0, 0.5}, {2.0, -0.5}, sigma, 123);
    const double tol = 5.0 * sigma / std::sqrt(static_cast<double>(n));
    double m0x = 0.0, m0y = 0.0, m1x = 0.0, m1y = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        m0x += ds.inputs(i, 0);
        m0y += ds.inputs(i, 1);
        m1x += ds.inputs(n + i, 0);
        m1y += ds.inputs(n + i, 1);
    }
    CHECK(std::abs(m0x / n - -2.0) <= tol);
    CHECK(std::abs(m0y / n - 0.5) <= tol);
    CHECK(std::abs(m1x / n - 2.0) <= tol);
    CHECK(std::abs(m1y / n - -0.5) <= tol);
}

TEST_CASE("two gaussians: identical seeds give bit-exact datasets") {
    const LabeledDataset a = gen_two_gaussians(50, {-1, 0}, {1, 0}, 0.3, 99);
    const LabeledDataset b = gen_two_gaussians(50, {-1, 0}, {1, 0}, 0.3, 99);
    CHECK(a.inputs.data == b.inputs.data);
    CHECK(a.labels == b.labels);
}

TEST_CASE("two gaussians: zero samples raise a data error") {
    CHECK_THROWS_AS((void)gen_two_gaussians(0, {0, 0}, {1, 1}, 1.0, 1), Error);
    CHECK_THROWS_AS((void)gen_two_gaussians(5, {0, 0}, {1, 1}, 0.0, 1), Error);
}

namespace {

void be32(std::ofstream& f, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

struct IdxFixture {
    fs::path images;
    fs::path labels;

    IdxFixture() {
        const fs::path dir = fs::temp_directory_path();
        images = dir / "bal_test_images-idx3-ubyte";
        labels = dir / "bal_test_labels-idx1-ubyte";
        // two 2x3 images, byte values chosen by hand
        std::ofstream fi(images, std::ios::binary | std::ios::trunc);
        be32(fi, 0x00000803);
        be32(fi, 2);
        be32(fi, 2);
        be32(fi, 3);
        const unsigned char pix[12] = {0, 51, 102, 153, 204, 255, 10, 20, 30, 40, 50, 60};
        fi.write(reinterpret_cast<const char*>(pix), sizeof(pix));
        std::ofstream fl(labels, std::ios::binary | std::ios::trunc);
        be32(fl, 0x00000801);
        be32(fl, 2);
        const unsigned char lab[2] = {4, 1};
        fl.write(reinterpret_cast<const char*>(lab), sizeof(lab));
    }
    ~IdxFixture() {
        fs::remove(images);
        fs::remove(labels);
    }
};

} // namespace

TEST_CASE("idx: hand-built fixture recovers exact pixel values") {
    const IdxFixture fx;
    const LabeledDataset ds = load_idx(fx.images.string(), fx.labels.string());
    REQUIRE(ds.size() == 2);
    REQUIRE(ds.inputs.cols == 6);
    CHECK(ds.inputs(0, 0) == 0.0);
    CHECK(ds.inputs(0, 1) == 51.0 / 255.0);
    CHECK(ds.inputs(0, 2) == 102.0 / 255.0);
    CHECK(ds.inputs(0, 5) == 1.0);
    CHECK(ds.inputs(1, 0) == 10.0 / 255.0);
    CHECK(ds.inputs(1, 5) == 60.0 / 255.0);
    CHECK(ds.labels[0] == 4);
    CHECK(ds.labels[1] == 1);
    CHECK(ds.class_count == 5);
    for (double v : ds.inputs.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("idx: bad magic names the offending file") {
    const IdxFixture fx;
    CHECK_THROWS_WITH_AS((void)load_idx(fx.labels.string(), fx.labels.string()),
                         doctest::Contains("bal_test_labels"), Error);
}

TEST_CASE("idx: image/label count mismatch raises a format error") {
    const IdxFixture fx;
    const fs::path bad = fs::temp_directory_path() / "bal_test_labels3-idx1-ubyte";
    {
        std::ofstream fl(bad, std::ios::binary | std::ios::trunc);
        be32(fl, 0x00000801);
        be32(fl, 3);
        const unsigned char lab[3] = {0, 1, 2};
        fl.write(reinterpret_cast<const char*>(lab), sizeof(lab));
    }
    CHECK_THROWS_AS((void)load_idx(fx.images.string(), bad.string()), Error);
    fs::remove(bad);
}

TEST_CASE("idx: truncated image payload raises a format error") {
    const IdxFixture fx;
    const fs::path bad = fs::temp_directory_path() / "bal_test_trunc-idx3-ubyte";
    {
        std::ofstream fi(bad, std::ios::binary | std::ios::trunc);
        be32(fi, 0x00000803);
        be32(fi, 2);
        be32(fi, 2);
        be32(fi, 3);
        const unsigned char pix[5] = {1, 2, 3, 4, 5}; // needs 12
        fi.write(reinterpret_cast<const char*>(pix), sizeof(pix));
    }
    CHECK_THROWS_AS((void)load_idx(bad.string(), fx.labels.string()), Error);
    fs::remove(bad);
}

TEST_CASE("bank: random round trip is byte-exact and rebuilds the index") {
    Rng rng(17);
    Tensor2 f(10, 4);
    for (double& v : f.data) v = rng.normal();
    std::vector<int> labels(10);
    for (int& l : labels) l = rng.uniform_int(3);
    const FeatureBank bank = make_bank(f, labels, 3);

    const fs::path path = fs::temp_directory_path() / "bal_test_bank.balftb";
    save_bank(bank, path.string());
    const FeatureBank loaded = load_bank(path.string());
    CHECK(loaded.features.data == bank.features.data);
    CHECK(loaded.labels == bank.labels);
    CHECK(loaded.class_count == bank.class_count);
    CHECK(loaded.by_class == bank.by_class);

    const fs::path path2 = fs::temp_directory_path() / "bal_test_bank2.balftb";
    save_bank(loaded, path2.string());
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)),
                         std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)),
                         std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    fs::remove(path);
    fs::remove(path2);
}

TEST_CASE("bank: per-class index partitions all rows") {
    Rng rng(18);
    Tensor2 f(30, 2);
    for (double& v : f.data) v = rng.normal();
    std::vector<int> labels(30);
    for (int& l : labels) l = rng.uniform_int(4);
    const FeatureBank bank = make_bank(f, labels, 4);
    std::size_t total = 0;
    for (int c = 0; c < 4; ++c) {
        for (std::size_t row : bank.by_class[static_cast<std::size_t>(c)])
            CHECK(bank.labels[row] == c);
        total += bank.by_class[static_cast<std::size_t>(c)].size();
    }
    CHECK(total == 30);
}

TEST_CASE("bank: empty banks are rejected") {
    CHECK_THROWS_AS((void)make_bank(Tensor2(0, 3), {}, 2), Error);
}

TEST_CASE("bank: bad magic raises a format error") {
    const fs::path path = fs::temp_directory_path() / "bal_test_badbank.balftb";
    {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        f << "NOTABANK00000000";
    }
    CHECK_THROWS_AS((void)load_bank(path.string()), Error);
    fs::remove(path);
}
