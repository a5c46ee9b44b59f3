#include "hybstab/backstepping.hpp"

#include <algorithm>
#include <cmath>

namespace hybstab {

namespace {

double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

}  // namespace

double eta(const BoundsCertificate& cert, const Vec& x1, double x2, double s) {
    return s * x2 + (1.0 - s) * cert.psi1(x1);
}

double delta(const BacksteppingController& ctl, const Vec& x1, double x2) {
    const BoundsCertificate& cert = *ctl.cert;
    const double gv = norm2(eval_grad_V1(cert, x1));
    const double integral = quad01(
        [&](double s) { return cert.Psi(x1, eta(cert, x1, x2, s)); }, ctl.quad_panels);
    const double gp = norm2(eval_grad_psi1(cert, x1));
    return gv * integral + ctl.K_V * cert.Psi(x1, x2) * (1.0 + gp);
}

double phi_g(const BacksteppingController& ctl, const Vec& x) {
    const ControlAffinePlant& plant = *ctl.plant;
    const BoundsCertificate& cert = *ctl.cert;
    const Vec x1 = split_x1(x);
    const double x2 = split_x2(x);

    const double f2v = plant.f2(x1, x2);
    if (f2v == 0.0) throw structural_error("phi_g: f2 vanishes at the evaluated point");

    const double lf1_psi = dot(eval_grad_psi1(cert, x1), plant.f1(x1, x2));

    const Vec gv1 = eval_grad_V1(cert, x1);
    double integral;
    if (plant.f1_affine_in_x2) {
        // integrand constant in s; one evaluation is exact
        integral = dot(gv1, eval_df1_dx2(plant, x1, x2));
    } else {
        integral = quad01(
            [&](double s) {
                return dot(gv1, eval_df1_dx2(plant, x1, eta(cert, x1, x2, s)));
            },
            ctl.quad_panels);
    }

    const double z = x2 - cert.psi1(x1);
    const double d = delta(ctl, x1, x2);
    const double damping = z * (ctl.c + 0.25 * ctl.c * d * d);
    return (ctl.K_V * lf1_psi - integral - damping) / (ctl.K_V * f2v);
}

double composite_V(const BacksteppingController& ctl, const Vec& x) {
    const Vec x1 = split_x1(x);
    const double z = split_x2(x) - ctl.cert->psi1(x1);
    return ctl.cert->V1(x1) + ctl.K_V * z * z;
}

double composite_V_dot(const BacksteppingController& ctl, const Vec& x, double u) {
    const BoundsCertificate& cert = *ctl.cert;
    const Vec x1 = split_x1(x);
    const double x2 = split_x2(x);
    const Vec dx = eval_dynamics(*ctl.plant, x, u);
    const Vec dx1(dx.begin(), dx.end() - 1);
    const double dx2 = dx.back();
    const double z = x2 - cert.psi1(x1);
    return dot(eval_grad_V1(cert, x1), dx1) +
           2.0 * ctl.K_V * z * (dx2 - dot(eval_grad_psi1(cert, x1), dx1));
}

bool sublevel_inclusion_holds(const BoundsCertificate& cert, double K_V, double excess,
                              double a, int boundary_samples, Vec* counterexample) {
    if (cert.x1_dim != 1)
        throw structural_error("sublevel_inclusion_holds: only scalar x1 is supported");
    const double level = cert.M + excess;
    const double r = sublevel_radius(cert, level);
    for (int k = 0; k <= boundary_samples; ++k) {
        const double s = -r + 2.0 * r * k / boundary_samples;
        const Vec x1{s};
        const double v1 = cert.V1(x1);
        if (v1 > level) continue;
        const double dz = std::sqrt((level - v1) / K_V);
        const double psi = cert.psi1(x1);
        for (const double x2 : {psi + dz, psi - dz}) {
            const Vec x{s, x2};
            if (attractor_distance(cert, x) >= a) {
                if (counterexample) *counterexample = x;
                return false;
            }
        }
    }
    return true;
}

double find_aprime_excess(const BoundsCertificate& cert, double K_V, double a,
                          const InclusionSearchConfig& config) {
    const double a_probe = a * config.a_safety;
    auto feasible = [&](double excess) {
        return sublevel_inclusion_holds(cert, K_V, excess, a_probe, config.boundary_samples);
    };
    if (!feasible(config.delta_min)) return -1.0;
    if (feasible(cert.M)) return cert.M;
    double lo = config.delta_min, hi = cert.M;
    while (hi - lo > config.bisect_rel_tol * hi) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? lo : hi) = mid;
    }
    return lo;
}

KvSearchResult find_KV_aprime(const BoundsCertificate& cert, double a,
                              const InclusionSearchConfig& config) {
    Vec last_counterexample;
    for (double K_V = config.K_V_initial; K_V <= config.K_V_max; K_V *= config.K_V_ratio) {
        const double excess = find_aprime_excess(cert, K_V, a, config);
        if (excess > 0.0) return {K_V, cert.M + excess};
        sublevel_inclusion_holds(cert, K_V, config.delta_min, a, config.boundary_samples,
                                 &last_counterexample);
    }
    throw search_failure("find_KV_aprime: K_V schedule exhausted without inclusion",
                         last_counterexample);
}

double compute_zeta(const BoundsCertificate& cert, double K_V, std::size_t grid) {
    if (cert.x1_dim != 1) throw structural_error("compute_zeta: only scalar x1 is supported");
    const double cap = cert.eps * cert.alpha(cert.M) + 1.0;
    auto member = [&](double x1, double z) {
        return cert.eps * cert.alpha(cert.V1(Vec{x1})) + z * z <= cap;
    };
    double r = 1.0;
    while ((member(r, 0.0) || member(-r, 0.0)) && r < 1e8) r *= 2.0;
    const double zmax = std::sqrt(cap);
    double zeta = 0.0;
    for (std::size_t i = 0; i < grid; ++i) {
        const double x1 = -r + 2.0 * r * i / (grid - 1);
        for (std::size_t j = 0; j < grid; ++j) {
            const double z = -zmax + 2.0 * zmax * j / (grid - 1);
            if (!member(x1, z)) continue;
            zeta = std::max(zeta, cert.V1(Vec{x1}) + K_V * z * z);
        }
    }
    return zeta;
}

double find_c_g(const BoundsCertificate& cert, double K_V, double a_prime) {
    if (a_prime <= cert.M) throw std::domain_error("find_c_g: a_prime must exceed M");
    const double zeta = compute_zeta(cert, K_V);
    const double k_alpha = alpha_lipschitz(cert, zeta);
    const double first = 1.0 / (cert.eps * (cert.alpha(a_prime) - cert.alpha(cert.M)));
    const double second = cert.eps * K_V * k_alpha / 2.0;
    return std::max({first, second, 1.0});
}

BacksteppingController make_backstepping(const ControlAffinePlant& plant,
                                         const BoundsCertificate& cert, double K_V,
                                         double a, double a_prime, double c,
                                         int quad_panels) {
    if (!(c > 1.0 + 1e-6)) throw std::domain_error("make_backstepping: c must exceed 1");
    if (!(a_prime > cert.M)) throw std::domain_error("make_backstepping: a_prime must exceed M");
    BacksteppingController ctl;
    ctl.plant = &plant;
    ctl.cert = &cert;
    ctl.K_V = K_V;
    ctl.a = a;
    ctl.a_prime = a_prime;
    ctl.c = c;
    ctl.quad_panels = quad_panels;
    ctl.zeta = compute_zeta(cert, K_V);
    ctl.c_g = find_c_g(cert, K_V, a_prime);
    return ctl;
}

BacksteppingController synthesize_backstepping(const ControlAffinePlant& plant,
                                               const BoundsCertificate& cert, double a,
                                               const InclusionSearchConfig& config) {
    const KvSearchResult kv = find_KV_aprime(cert, a, config);
    const double c_g = find_c_g(cert, kv.K_V, kv.a_prime);
    const double c = std::max(1.0 + 1e-3, c_g * (1.0 + 1e-3));
    return make_backstepping(plant, cert, kv.K_V, a, kv.a_prime, c);
}

}  // namespace hybstab
