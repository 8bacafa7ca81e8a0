#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bal {

// Dense row-major matrix of doubles. Rows index samples throughout the project.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Tensor2(std::size_t r, std::size_t c, std::vector<double> d);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
};

// c = a * b
Tensor2 matmul(const Tensor2& a, const Tensor2& b);
// c = a^T * b   (a is k x r, result r x c)
Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b);
// c = a * b^T   (b is c x k, result r x c)
Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b);

void add_row_vector(Tensor2& a, std::span<const double> v);
bool all_finite(const Tensor2& a);
bool all_finite(std::span<const double> v);

// Single row view packaged as a 1 x n tensor (copies).
Tensor2 row_tensor(std::span<const double> v);

} // namespace bal
