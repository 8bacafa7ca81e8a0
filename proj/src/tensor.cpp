#include "bal/tensor.hpp"

#include <cmath>

#include "bal/error.hpp"

namespace bal {

Tensor2::Tensor2(std::size_t r, std::size_t c, std::vector<double> d)
    : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != rows * cols)
        fail_shape("Tensor2: data length " + std::to_string(data.size()) +
                   " != rows*cols " + std::to_string(rows * cols));
}

Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.rows)
        fail_shape("matmul: inner dimensions " + std::to_string(a.cols) + " vs " +
                   std::to_string(b.rows));
    Tensor2 c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.data.data() + i * a.cols;
        double* ci = c.data.data() + i * c.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = ai[k];
            if (aik == 0.0) continue;
            const double* bk = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
    if (a.rows != b.rows)
        fail_shape("matmul_tn: row counts " + std::to_string(a.rows) + " vs " +
                   std::to_string(b.rows));
    Tensor2 c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* ak = a.data.data() + k * a.cols;
        const double* bk = b.data.data() + k * b.cols;
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = ak[i];
            if (aki == 0.0) continue;
            double* ci = c.data.data() + i * c.cols;
            for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aki * bk[j];
        }
    }
    return c;
}

Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
    if (a.cols != b.cols)
        fail_shape("matmul_nt: col counts " + std::to_string(a.cols) + " vs " +
                   std::to_string(b.cols));
    Tensor2 c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* ai = a.data.data() + i * a.cols;
        double* ci = c.data.data() + i * c.cols;
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* bj = b.data.data() + j * b.cols;
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += ai[k] * bj[k];
            ci[j] = s;
        }
    }
    return c;
}

void add_row_vector(Tensor2& a, std::span<const double> v) {
    if (v.size() != a.cols) fail_shape("add_row_vector: width mismatch");
    for (std::size_t i = 0; i < a.rows; ++i) {
        double* ai = a.data.data() + i * a.cols;
        for (std::size_t j = 0; j < a.cols; ++j) ai[j] += v[j];
    }
}

bool all_finite(const Tensor2& a) { return all_finite(std::span<const double>(a.data)); }

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

Tensor2 row_tensor(std::span<const double> v) {
    Tensor2 t(1, v.size());
    std::copy(v.begin(), v.end(), t.data.begin());
    return t;
}

} // namespace bal
