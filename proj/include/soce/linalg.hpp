#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "soce/errors.hpp"

namespace soce {

/// Dense row-major matrix of doubles.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(data).subspan(i * cols, cols);
    }
    std::span<double> row(std::size_t i) {
        return std::span<double>(data).subspan(i * cols, cols);
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline std::vector<double> matvec(const DenseMatrix& a, std::span<const double> x) {
    if (x.size() != a.cols) throw DimensionMismatch("matvec: vector length != matrix cols");
    std::vector<double> y(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const auto row = a.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
    return y;
}

namespace detail {

// In-place lower Cholesky factor of a symmetric matrix. Throws when a
// pivot <= 0 arises.
inline void cholesky_factor(DenseMatrix& a) {
    const std::size_t n = a.rows;
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= a(j, k) * a(j, k);
        if (!(diag > 0.0)) throw NotPositiveDefinite("Cholesky pivot <= 0 at index " + std::to_string(j));
        const double root = std::sqrt(diag);
        a(j, j) = root;
        for (std::size_t i = j + 1; i < n; ++i) {
            double acc = a(i, j);
            const double* ri = &a.data[i * n];
            const double* rj = &a.data[j * n];
            for (std::size_t k = 0; k < j; ++k) acc -= ri[k] * rj[k];
            a(i, j) = acc / root;
        }
    }
}

inline std::vector<double> cholesky_back_substitute(const DenseMatrix& factor,
                                                    std::span<const double> b) {
    const std::size_t n = factor.rows;
    std::vector<double> x(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) { // L y = b
        double acc = x[i];
        for (std::size_t k = 0; k < i; ++k) acc -= factor(i, k) * x[k];
        x[i] = acc / factor(i, i);
    }
    for (std::size_t i = n; i-- > 0;) { // L^T x = y
        double acc = x[i];
        for (std::size_t k = i + 1; k < n; ++k) acc -= factor(k, i) * x[k];
        x[i] = acc / factor(i, i);
    }
    return x;
}

} // namespace detail

/// Solves A x = b for symmetric positive-definite A. The input is
/// symmetrized as (A + A^T)/2 before factoring to absorb round-off;
/// asymmetry beyond 1e-9 relative is rejected.
inline std::vector<double> cholesky_solve(const DenseMatrix& a, std::span<const double> b) {
    if (a.rows != a.cols) throw DimensionMismatch("cholesky_solve: matrix not square");
    if (b.size() != a.rows) throw DimensionMismatch("cholesky_solve: rhs length != matrix dimension");
    const std::size_t n = a.rows;

    double max_abs = 0.0;
    double max_asym = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            max_abs = std::max({max_abs, std::abs(a(i, j)), std::abs(a(j, i))});
            max_asym = std::max(max_asym, std::abs(a(i, j) - a(j, i)));
        }
    }
    if (max_asym > 1e-9 * (1.0 + max_abs))
        throw InvalidArgument("cholesky_solve: matrix asymmetric beyond 1e-9 relative tolerance");

    DenseMatrix sym(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) sym(i, j) = 0.5 * (a(i, j) + a(j, i));

    detail::cholesky_factor(sym);
    return detail::cholesky_back_substitute(sym, b);
}

/// Normal equations of a residual Jacobian: gram = J^T J (full, symmetric)
/// and gradient = J^T r. Accumulated row by row in index order, so the
/// result is deterministic for fixed inputs.
struct NormalEquations {
    DenseMatrix gram;
    std::vector<double> gradient;
};

inline NormalEquations assemble_normal_equations(const DenseMatrix& jacobian,
                                                 std::span<const double> residuals) {
    if (residuals.size() != jacobian.rows)
        throw DimensionMismatch("assemble_normal_equations: residual length != Jacobian rows");
    const std::size_t n = jacobian.rows;
    const std::size_t p = jacobian.cols;
    NormalEquations eq{DenseMatrix(p, p), std::vector<double>(p, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = &jacobian.data[i * p];
        const double r = residuals[i];
        for (std::size_t k = 0; k < p; ++k) {
            const double scale = row[k];
            eq.gradient[k] += scale * r;
            if (scale == 0.0) continue;
            double* out = &eq.gram.data[k * p];
            for (std::size_t j = k; j < p; ++j) out[j] += scale * row[j];
        }
    }
    for (std::size_t k = 0; k < p; ++k) // mirror the upper triangle
        for (std::size_t j = k + 1; j < p; ++j) eq.gram(j, k) = eq.gram(k, j);
    return eq;
}

/// Damped Gauss-Newton step: solves (J^T J + mu I) delta = -J^T r.
inline std::vector<double> solve_damped_step(const NormalEquations& eq, double mu) {
    if (mu < 0.0) throw InvalidArgument("solve_damped_step: mu must be >= 0");
    const std::size_t p = eq.gradient.size();
    DenseMatrix damped = eq.gram;
    for (std::size_t k = 0; k < p; ++k) damped(k, k) += mu;
    std::vector<double> rhs(p);
    for (std::size_t k = 0; k < p; ++k) rhs[k] = -eq.gradient[k];
    return cholesky_solve(damped, rhs);
}

inline std::vector<double> solve_damped_step(const DenseMatrix& jacobian,
                                             std::span<const double> residuals, double mu) {
    if (jacobian.rows < 1 || jacobian.cols < 1)
        throw DimensionMismatch("solve_damped_step: Jacobian must be at least 1x1");
    return solve_damped_step(assemble_normal_equations(jacobian, residuals), mu);
}

} // namespace soce
