#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace singfit {

/// Small dense row-major matrix, just big enough for normal equations
/// over a handful of fit parameters.
struct Matrix {
    std::size_t rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

/// Solve A x = b by Gauss elimination with partial pivoting.
inline std::vector<double> solve(Matrix a, std::vector<double> b) {
    const std::size_t n = a.rows;
    if (a.cols != n || b.size() != n) throw std::invalid_argument("solve: shape mismatch");
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t i = col + 1; i < n; ++i)
            if (std::abs(a(i, col)) > std::abs(a(piv, col))) piv = i;
        if (a(piv, col) == 0.0) throw std::runtime_error("solve: singular matrix");
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(piv, j), a(col, j));
            std::swap(b[piv], b[col]);
        }
        for (std::size_t i = col + 1; i < n; ++i) {
            const double f = a(i, col) / a(col, col);
            for (std::size_t j = col; j < n; ++j) a(i, j) -= f * a(col, j);
            b[i] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a(i, j) * x[j];
        x[i] = s / a(i, i);
    }
    return x;
}

/// Inverse via column-by-column solves; fine at these sizes.
inline Matrix inverse(const Matrix& a) {
    const std::size_t n = a.rows;
    Matrix inv(n, n);
    std::vector<double> e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e.assign(n, 0.0);
        e[j] = 1.0;
        const std::vector<double> col = solve(a, e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
}

}  // namespace singfit
