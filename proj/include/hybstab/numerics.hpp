#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Small dense linear algebra and quadrature used throughout the toolkit.
// Everything here is value-semantic and re-entrant; matrices are tiny
// (n <= ~8), so simplicity wins over asymptotics.

namespace hybstab {

struct numerics_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct dimension_error : numerics_error {
    using numerics_error::numerics_error;
};

struct definiteness_error : numerics_error {
    using numerics_error::numerics_error;
};

using Vec = std::vector<double>;

// Row-major dense matrix.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}
    Mat(std::size_t r, std::size_t c, std::initializer_list<double> entries)
        : rows(r), cols(c), a(entries) {
        if (a.size() != r * c) throw dimension_error("Mat: initializer size mismatch");
    }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Mat diag(std::span<const double> d) {
        Mat m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }
    static Mat col(std::span<const double> v) {
        Mat m(v.size(), 1);
        for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
        return m;
    }

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    bool square() const { return rows == cols; }
};

Mat operator+(const Mat& x, const Mat& y);
Mat operator-(const Mat& x, const Mat& y);
Mat operator*(const Mat& x, const Mat& y);
Mat operator*(double s, const Mat& x);
Mat transpose(const Mat& x);
double frobenius_norm(const Mat& x);
double max_abs(const Mat& x);

// Symmetrize (x + x^T)/2; input must be square.
Mat symmetrize(const Mat& x);

struct SymEigResult {
    std::vector<double> eigenvalues;  // ascending
    Mat eigenvectors;                 // orthonormal columns, same order
};

// Cyclic Jacobi rotations; converged when the off-diagonal Frobenius norm
// drops below 1e-13 * ||A||_F, at most 100 sweeps.
SymEigResult sym_eig(const Mat& a, double sym_tol = 1e-12);

struct PdReport {
    bool positive_definite = false;
    double min_eigenvalue = 0.0;
};

PdReport is_pd(const Mat& a, double margin = 0.0);

// Cholesky factor (lower triangular); throws definiteness_error on a
// non-positive pivot.
Mat cholesky(const Mat& a);

// Solve a * x = b for SPD a via Cholesky + triangular solves.
Mat solve_spd(const Mat& a, const Mat& b);

// Composite Simpson on [0,1] over 2*panels subintervals.
double quad01(const std::function<double(double)>& f, int panels = 16);

struct Extrema {
    double min = 0.0;
    double max = 0.0;
};

struct Box {
    Vec lo;
    Vec hi;
    std::size_t dim() const { return lo.size(); }
};

// Exact min/max of f over the tensor grid (endpoints included).  The raw
// extrema under-approximate the true range; callers needing outer bounds
// apply inflate_extrema.
Extrema grid_extrema(const std::function<double(std::span<const double>)>& f,
                     const Box& box, std::span<const std::size_t> resolution);

// Widen an interval by `factor` of its range on each side (default policy 2%).
Extrema inflate_extrema(const Extrema& e, double factor = 0.02);

}  // namespace hybstab
