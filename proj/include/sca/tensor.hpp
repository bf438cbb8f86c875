#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sca {

// Dense row-major matrix of doubles. All numeric state in the project
// (minibatches, weights, latent codes, centroids) lives in these.
struct Tensor2 {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Tensor2() = default;
    Tensor2(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    std::size_t size() const { return data.size(); }

    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline void check_shape(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("shape mismatch: " + what);
}

// out = a * b
inline Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    check_shape(a.cols == b.rows, "matmul inner dims");
    Tensor2 out(a.rows, b.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + i * a.cols;
        double* orow = out.data.data() + i * out.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    return out;
}

// out = a^T * b
inline Tensor2 matmul_tn(const Tensor2& a, const Tensor2& b) {
    check_shape(a.rows == b.rows, "matmul_tn inner dims");
    Tensor2 out(a.cols, b.cols, 0.0);
    for (std::size_t n = 0; n < a.rows; ++n) {
        const double* arow = a.data.data() + n * a.cols;
        const double* brow = b.data.data() + n * b.cols;
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double ani = arow[i];
            if (ani == 0.0) continue;
            double* orow = out.data.data() + i * out.cols;
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += ani * brow[j];
        }
    }
    return out;
}

// out = a * b^T
inline Tensor2 matmul_nt(const Tensor2& a, const Tensor2& b) {
    check_shape(a.cols == b.cols, "matmul_nt inner dims");
    Tensor2 out(a.rows, b.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.data.data() + i * a.cols;
        double* orow = out.data.data() + i * out.cols;
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.data.data() + j * b.cols;
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            orow[j] = s;
        }
    }
    return out;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace sca
