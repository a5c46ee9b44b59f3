#include "hybstab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hybstab {

namespace {

void require(bool cond, const char* msg) {
    if (!cond) throw dimension_error(msg);
}

}  // namespace

Mat operator+(const Mat& x, const Mat& y) {
    require(x.rows == y.rows && x.cols == y.cols, "Mat+: shape mismatch");
    Mat r = x;
    for (std::size_t k = 0; k < r.a.size(); ++k) r.a[k] += y.a[k];
    return r;
}

Mat operator-(const Mat& x, const Mat& y) {
    require(x.rows == y.rows && x.cols == y.cols, "Mat-: shape mismatch");
    Mat r = x;
    for (std::size_t k = 0; k < r.a.size(); ++k) r.a[k] -= y.a[k];
    return r;
}

Mat operator*(const Mat& x, const Mat& y) {
    require(x.cols == y.rows, "Mat*: inner dimension mismatch");
    Mat r(x.rows, y.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t k = 0; k < x.cols; ++k) {
            const double v = x(i, k);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < y.cols; ++j) r(i, j) += v * y(k, j);
        }
    return r;
}

Mat operator*(double s, const Mat& x) {
    Mat r = x;
    for (double& v : r.a) v *= s;
    return r;
}

Mat transpose(const Mat& x) {
    Mat r(x.cols, x.rows);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) r(j, i) = x(i, j);
    return r;
}

double frobenius_norm(const Mat& x) {
    double s = 0.0;
    for (double v : x.a) s += v * v;
    return std::sqrt(s);
}

double max_abs(const Mat& x) {
    double s = 0.0;
    for (double v : x.a) s = std::max(s, std::abs(v));
    return s;
}

Mat symmetrize(const Mat& x) {
    require(x.square(), "symmetrize: non-square");
    Mat r = x;
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) r(i, j) = 0.5 * (x(i, j) + x(j, i));
    return r;
}

SymEigResult sym_eig(const Mat& a, double sym_tol) {
    require(a.square(), "sym_eig: non-square input");
    const std::size_t n = a.rows;
    const double scale = 1.0 + frobenius_norm(a);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(a(i, j) - a(j, i)) > sym_tol * scale)
                throw dimension_error("sym_eig: input not symmetric");

    Mat d = symmetrize(a);
    Mat q = Mat::identity(n);
    const double anorm = frobenius_norm(d);
    const double stop = 1e-13 * (anorm > 0.0 ? anorm : 1.0);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * d(i, j) * d(i, j);
        if (std::sqrt(off) < stop) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t r = p + 1; r < n; ++r) {
                const double apq = d(p, r);
                if (apq == 0.0) continue;
                const double app = d(p, p);
                const double aqq = d(r, r);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double dkp = d(k, p);
                    const double dkq = d(k, r);
                    d(k, p) = c * dkp - s * dkq;
                    d(k, r) = s * dkp + c * dkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double dpk = d(p, k);
                    const double dqk = d(r, k);
                    d(p, k) = c * dpk - s * dqk;
                    d(r, k) = s * dpk + c * dqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double qkp = q(k, p);
                    const double qkq = q(k, r);
                    q(k, p) = c * qkp - s * qkq;
                    q(k, r) = s * qkp + c * qkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return d(i, i) < d(j, j); });

    SymEigResult res;
    res.eigenvalues.resize(n);
    res.eigenvectors = Mat(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        res.eigenvalues[j] = d(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) res.eigenvectors(i, j) = q(i, order[j]);
    }
    return res;
}

PdReport is_pd(const Mat& a, double margin) {
    const auto eig = sym_eig(a);
    PdReport rep;
    rep.min_eigenvalue = eig.eigenvalues.front();
    rep.positive_definite = rep.min_eigenvalue > margin;
    return rep;
}

Mat cholesky(const Mat& a) {
    require(a.square(), "cholesky: non-square");
    const std::size_t n = a.rows;
    Mat l(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            if (i == j) {
                if (s <= 0.0) throw definiteness_error("cholesky: non-positive pivot");
                l(i, i) = std::sqrt(s);
            } else {
                l(i, j) = s / l(j, j);
            }
        }
    }
    return l;
}

Mat solve_spd(const Mat& a, const Mat& b) {
    require(a.rows == b.rows, "solve_spd: shape mismatch");
    const Mat l = cholesky(a);
    const std::size_t n = a.rows;
    Mat x = b;
    // forward: l * y = b
    for (std::size_t col = 0; col < b.cols; ++col) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, col);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, col);
            x(i, col) = s / l(i, i);
        }
        // backward: l^T * x = y
        for (std::size_t ii = n; ii-- > 0;) {
            double s = x(ii, col);
            for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, col);
            x(ii, col) = s / l(ii, ii);
        }
    }
    return x;
}

double quad01(const std::function<double(double)>& f, int panels) {
    if (panels < 1) throw numerics_error("quad01: panels must be >= 1");
    const int m = 2 * panels;
    const double h = 1.0 / m;
    double s = 0.0;
    for (int k = 0; k <= m; ++k) {
        const double fx = f(k * h);
        if (!std::isfinite(fx)) throw numerics_error("quad01: non-finite sample");
        const double w = (k == 0 || k == m) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
        s += w * fx;
    }
    return s * h / 3.0;
}

Extrema grid_extrema(const std::function<double(std::span<const double>)>& f,
                     const Box& box, std::span<const std::size_t> resolution) {
    const std::size_t d = box.dim();
    require(box.hi.size() == d && resolution.size() == d, "grid_extrema: shape mismatch");
    for (std::size_t k = 0; k < d; ++k)
        if (resolution[k] < 2) throw numerics_error("grid_extrema: resolution must be >= 2 per axis");

    std::vector<std::size_t> idx(d, 0);
    Vec x(d);
    Extrema e{std::numeric_limits<double>::infinity(),
              -std::numeric_limits<double>::infinity()};
    for (;;) {
        for (std::size_t k = 0; k < d; ++k)
            x[k] = box.lo[k] + (box.hi[k] - box.lo[k]) *
                                   static_cast<double>(idx[k]) /
                                   static_cast<double>(resolution[k] - 1);
        const double v = f(x);
        if (!std::isfinite(v)) throw numerics_error("grid_extrema: non-finite sample");
        e.min = std::min(e.min, v);
        e.max = std::max(e.max, v);

        std::size_t k = 0;
        while (k < d && ++idx[k] == resolution[k]) idx[k++] = 0;
        if (k == d) break;
    }
    return e;
}

Extrema inflate_extrema(const Extrema& e, double factor) {
    const double pad = factor * (e.max - e.min);
    return {e.min - pad, e.max + pad};
}

}  // namespace hybstab
