#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace jdsim {

using Vector = std::vector<double>;

/// Dense row-major matrix. Sized by whoever fills it; no invariants beyond
/// data.size() == rows * cols.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    void resize(std::size_t r, std::size_t c) {
        rows = r;
        cols = c;
        data.assign(r * c, 0.0);
    }

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

inline double squared_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

/// Euclidean norm for vectors.
inline double norm(std::span<const double> v) {
    if (v.size() == 1) return std::abs(v[0]);
    return std::sqrt(squared_norm(v));
}

/// Trace (Frobenius) norm sqrt(trace(A^T A)).
inline double norm(const Matrix& a) { return norm(std::span<const double>(a.data)); }

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace jdsim
