#include "hybstab/plant.hpp"

#include <algorithm>
#include <cmath>

namespace hybstab {

namespace {

double norm2(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

double fd_step(double arg) { return 1e-6 * (1.0 + std::abs(arg)); }

Vec split_x1(const Vec& x) { return Vec(x.begin(), x.end() - 1); }

ControlAffinePlant validate_plant(ControlAffinePlant plant) {
    if (plant.n < 2) throw structural_error("plant: state dimension must be >= 2");
    const Vec z1(plant.n - 1, 0.0);
    const Vec f10 = plant.f1(z1, 0.0);
    const Vec h10 = plant.h1(z1, 0.0, 0.0);
    const double h20 = plant.h2(z1, 0.0, 0.0);
    if (norm2(f10) > 1e-12 || norm2(h10) > 1e-12 || std::abs(h20) > 1e-12)
        throw structural_error("plant: origin is not an equilibrium of the drift terms");
    return plant;
}

Vec eval_dynamics(const ControlAffinePlant& plant, const Vec& x, double u) {
    if (x.size() != plant.n) throw dimension_error("eval_dynamics: state dimension mismatch");
    const Vec x1 = split_x1(x);
    const double x2 = split_x2(x);
    const double f2v = plant.f2(x1, x2);
    if (f2v == 0.0) throw structural_error("eval_dynamics: f2 vanishes at the evaluated point");
    Vec dx(plant.n);
    const Vec f1v = plant.f1(x1, x2);
    const Vec h1v = plant.h1(x1, x2, u);
    for (std::size_t i = 0; i + 1 < plant.n; ++i) dx[i] = f1v[i] + h1v[i];
    dx[plant.n - 1] = f2v * u + plant.h2(x1, x2, u);
    return dx;
}

Vec eval_df1_dx2(const ControlAffinePlant& plant, const Vec& x1, double x2) {
    if (plant.df1_dx2) return plant.df1_dx2(x1, x2);
    const double h = fd_step(x2);
    const Vec fp = plant.f1(x1, x2 + h);
    const Vec fm = plant.f1(x1, x2 - h);
    Vec g(fp.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (fp[i] - fm[i]) / (2.0 * h);
    return g;
}

Vec eval_dh1_dx2(const ControlAffinePlant& plant, const Vec& x1, double x2, double u) {
    if (plant.dh1_dx2) return plant.dh1_dx2(x1, x2, u);
    const double h = fd_step(x2);
    const Vec fp = plant.h1(x1, x2 + h, u);
    const Vec fm = plant.h1(x1, x2 - h, u);
    Vec g(fp.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (fp[i] - fm[i]) / (2.0 * h);
    return g;
}

Mat eval_dfh_dx(const ControlAffinePlant& plant, const Vec& x, double u) {
    if (plant.dfh_dx) return plant.dfh_dx(x, u);
    const std::size_t n = plant.n;
    Mat j(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double h = fd_step(x[k]);
        Vec xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        const Vec fp = eval_dynamics(plant, xp, u);
        const Vec fm = eval_dynamics(plant, xm, u);
        for (std::size_t i = 0; i < n; ++i) j(i, k) = (fp[i] - fm[i]) / (2.0 * h);
        if (!std::isfinite(j(0, k))) throw numerics_error("dfh_dx: non-finite derivative");
    }
    return j;
}

Vec eval_dfh_du(const ControlAffinePlant& plant, const Vec& x, double u) {
    if (plant.dfh_du) return plant.dfh_du(x, u);
    const double h = fd_step(u);
    const Vec fp = eval_dynamics(plant, x, u + h);
    const Vec fm = eval_dynamics(plant, x, u - h);
    Vec g(plant.n);
    for (std::size_t i = 0; i < plant.n; ++i) g[i] = (fp[i] - fm[i]) / (2.0 * h);
    return g;
}

BoundsCertificate validate_certificate(BoundsCertificate cert) {
    if (!(cert.eps > 0.0 && cert.eps < 1.0))
        throw structural_error("certificate: eps must lie in (0,1)");
    if (!(cert.M > 0.0)) throw structural_error("certificate: M must be positive");
    const Vec z1(cert.x1_dim, 0.0);
    if (std::abs(cert.V1(z1)) > 1e-12) throw structural_error("certificate: V1(0) != 0");
    if (std::abs(cert.alpha(0.0)) > 1e-12) throw structural_error("certificate: alpha(0) != 0");
    double prev = 0.0;
    for (int k = 1; k <= 32; ++k) {
        const double s = 0.25 * k;
        const double v = cert.alpha(s);
        if (v <= prev) throw structural_error("certificate: alpha not strictly increasing");
        prev = v;
        Vec x1(cert.x1_dim, s / std::sqrt(static_cast<double>(cert.x1_dim)));
        if (cert.V1(x1) <= 0.0) throw structural_error("certificate: V1 not positive away from 0");
    }
    return cert;
}

Vec eval_grad_V1(const BoundsCertificate& cert, const Vec& x1) {
    if (cert.grad_V1) return cert.grad_V1(x1);
    Vec g(x1.size());
    for (std::size_t k = 0; k < x1.size(); ++k) {
        const double h = fd_step(x1[k]);
        Vec xp = x1, xm = x1;
        xp[k] += h;
        xm[k] -= h;
        g[k] = (cert.V1(xp) - cert.V1(xm)) / (2.0 * h);
    }
    return g;
}

Vec eval_grad_psi1(const BoundsCertificate& cert, const Vec& x1) {
    if (cert.grad_psi1) return cert.grad_psi1(x1);
    Vec g(x1.size());
    for (std::size_t k = 0; k < x1.size(); ++k) {
        const double h = fd_step(x1[k]);
        Vec xp = x1, xm = x1;
        xp[k] += h;
        xm[k] -= h;
        g[k] = (cert.psi1(xp) - cert.psi1(xm)) / (2.0 * h);
    }
    return g;
}

double alpha_lipschitz(const BoundsCertificate& cert, double hi, int samples) {
    double best = 0.0;
    const double h = hi / samples;
    for (int k = 0; k < samples; ++k) {
        const double a = cert.alpha(k * h);
        const double b = cert.alpha((k + 1) * h);
        best = std::max(best, std::abs(b - a) / h);
    }
    return best;
}

bool attractor_contains(const BoundsCertificate& cert, const Vec& x, double tol) {
    const Vec x1 = split_x1(x);
    const double x2 = split_x2(x);
    return cert.V1(x1) <= cert.M + tol && std::abs(x2 - cert.psi1(x1)) <= tol;
}

double sublevel_radius(const BoundsCertificate& cert, double level) {
    double r = 1.0;
    auto v = [&](double s) { return cert.V1(Vec{s}); };
    while ((v(r) <= level || v(-r) <= level) && r < 1e8) r *= 2.0;
    return r;
}

double attractor_distance(const BoundsCertificate& cert, const Vec& x) {
    if (x.size() != 2)
        throw structural_error("attractor_distance: only the scalar-x1 case is supported");
    const double r = sublevel_radius(cert, cert.M);
    auto d2 = [&](double s) {
        const Vec x1{s};
        if (cert.V1(x1) > cert.M) return std::numeric_limits<double>::infinity();
        const double dx = x[0] - s;
        const double dy = x[1] - cert.psi1(x1);
        return dx * dx + dy * dy;
    };
    const int kN = 400;
    double best = std::numeric_limits<double>::infinity();
    double sbest = 0.0;
    for (int k = 0; k <= kN; ++k) {
        const double s = -r + 2.0 * r * k / kN;
        const double v = d2(s);
        if (v < best) {
            best = v;
            sbest = s;
        }
    }
    // golden-section refine around the best grid cell
    double lo = sbest - 2.0 * r / kN, hi = sbest + 2.0 * r / kN;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    double fc = d2(c), fd = d2(d);
    for (int it = 0; it < 60; ++it) {
        if (fc < fd) {
            hi = d;
            d = c;
            fd = fc;
            c = hi - gr * (hi - lo);
            fc = d2(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + gr * (hi - lo);
            fd = d2(d);
        }
    }
    best = std::min({best, fc, fd});
    return std::sqrt(best);
}

BoundsCheckReport check_bounds_certificate(const ControlAffinePlant& plant,
                                           const BoundsCertificate& cert,
                                           const Box& sample_box,
                                           std::span<const std::size_t> resolution,
                                           double pass_tol) {
    const std::size_t nx1 = plant.n - 1;
    if (sample_box.dim() != nx1 + 2 || resolution.size() != nx1 + 2)
        throw dimension_error("check_bounds_certificate: box must cover (x1..., x2, u)");

    BoundsCheckReport report;
    auto track = [](AssumptionItemReport& item, double slack, const Vec& pt) {
        if (slack < item.min_slack) {
            item.min_slack = slack;
            item.worst_point = pt;
        }
    };

    AssumptionItemReport item_a{"a: L_f1 V1(x1,psi1) + alpha(V1) <= 0",
                                std::numeric_limits<double>::infinity(), {}, false};
    AssumptionItemReport item_b1{"b: ||h1|| <= Psi", std::numeric_limits<double>::infinity(), {}, false};
    AssumptionItemReport item_b2{"b: L_h1 V1(x1,psi1,u) <= (1-eps)alpha(V1) + eps alpha(M)",
                                 std::numeric_limits<double>::infinity(), {}, false};
    AssumptionItemReport item_c{"c: ||d h1/d x2|| <= Psi", std::numeric_limits<double>::infinity(), {}, false};
    AssumptionItemReport item_d{"d: |h2| <= Psi", std::numeric_limits<double>::infinity(), {}, false};

    // x1-only sweep (item a), and x1 x u sweep (item b, Lie part along x2 = psi1(x1))
    {
        Box b1{Vec(sample_box.lo.begin(), sample_box.lo.begin() + nx1),
               Vec(sample_box.hi.begin(), sample_box.hi.begin() + nx1)};
        std::vector<std::size_t> r1(resolution.begin(), resolution.begin() + nx1);
        grid_extrema(
            [&](std::span<const double> p) {
                const Vec x1(p.begin(), p.end());
                const double psi = cert.psi1(x1);
                const double lf = dot(eval_grad_V1(cert, x1), plant.f1(x1, psi));
                track(item_a, -(lf + cert.alpha(cert.V1(x1))), x1);
                return 0.0;
            },
            b1, r1);

        Box b2 = b1;
        b2.lo.push_back(sample_box.lo.back());
        b2.hi.push_back(sample_box.hi.back());
        std::vector<std::size_t> r2 = r1;
        r2.push_back(resolution.back());
        grid_extrema(
            [&](std::span<const double> p) {
                const Vec x1(p.begin(), p.end() - 1);
                const double u = p.back();
                const double psi = cert.psi1(x1);
                const double lh = dot(eval_grad_V1(cert, x1), plant.h1(x1, psi, u));
                const double rhs = (1.0 - cert.eps) * cert.alpha(cert.V1(x1)) +
                                   cert.eps * cert.alpha(cert.M);
                track(item_b2, rhs - lh, Vec(p.begin(), p.end()));
                return 0.0;
            },
            b2, r2);
    }

    // full (x1, x2, u) sweep for items b-norm, c, d
    grid_extrema(
        [&](std::span<const double> p) {
            const Vec x1(p.begin(), p.end() - 2);
            const double x2 = p[p.size() - 2];
            const double u = p.back();
            const double psi_bound = cert.Psi(x1, x2);
            const Vec pt(p.begin(), p.end());
            track(item_b1, psi_bound - norm2(plant.h1(x1, x2, u)), pt);
            track(item_c, psi_bound - norm2(eval_dh1_dx2(plant, x1, x2, u)), pt);
            track(item_d, psi_bound - std::abs(plant.h2(x1, x2, u)), pt);
            return 0.0;
        },
        sample_box, resolution);

    report.items = {item_a, item_b1, item_b2, item_c, item_d};
    report.all_pass = true;
    for (auto& item : report.items) {
        item.pass = item.min_slack >= -pass_tol;
        report.all_pass = report.all_pass && item.pass;
    }
    return report;
}

}  // namespace hybstab
