#include "hybstab/bench_example.hpp"

#include <cmath>

#include <json.hpp>

namespace hybstab {

K1Window k1_window(double theta, const Vec& mu) {
    K1Window w;
    w.lower = 0.5 * theta * (1.0 / (mu[0] * mu[0]) + 3.0);
    w.upper = mu[1] / mu[0] - 2.0 * theta * mu[0] - 1.0;
    return w;
}

DerivedConstants derived_constants(double theta, double K1) {
    if (K1 <= 1.5 * theta)
        throw std::domain_error("derived_constants: need K1 > 3*theta/2");
    DerivedConstants d;
    d.eps_max = 1.0 - 3.0 * theta / (2.0 * K1);
    d.M_min = theta / (4.0 * K1 * d.eps_max);
    return d;
}

ControlAffinePlant make_example_plant(double theta) {
    ControlAffinePlant p;
    p.n = 2;
    p.f1 = [theta](const Vec& x1, double x2) {
        return Vec{x1[0] + x2 + theta * x1[0] * x1[0]};
    };
    p.f2 = [](const Vec&, double) { return 1.0; };
    p.h1 = [theta](const Vec& x1, double, double u) {
        return Vec{theta * (1.0 + x1[0]) * std::sin(u)};
    };
    p.h2 = [](const Vec&, double, double) { return 0.0; };

    p.df1_dx2 = [](const Vec&, double) { return Vec{1.0}; };
    p.dh1_dx2 = [](const Vec&, double, double) { return Vec{0.0}; };
    p.dfh_dx = [theta](const Vec& x, double u) {
        Mat j(2, 2);
        j(0, 0) = 1.0 + 2.0 * theta * x[0] + theta * std::sin(u);
        j(0, 1) = 1.0;
        j(1, 0) = 0.0;
        j(1, 1) = 0.0;
        return j;
    };
    p.dfh_du = [theta](const Vec& x, double u) {
        return Vec{theta * (1.0 + x[0]) * std::cos(u), 1.0};
    };
    p.f1_affine_in_x2 = true;
    return validate_plant(p);
}

BoundsCertificate make_example_certificate(double theta, double K1) {
    const DerivedConstants d = derived_constants(theta, K1);
    BoundsCertificate cert;
    cert.x1_dim = 1;
    cert.V1 = [](const Vec& x1) { return 0.5 * x1[0] * x1[0]; };
    cert.grad_V1 = [](const Vec& x1) { return Vec{x1[0]}; };
    cert.psi1 = [theta, K1](const Vec& x1) {
        return -(1.0 + K1) * x1[0] - theta * x1[0] * x1[0];
    };
    cert.grad_psi1 = [theta, K1](const Vec& x1) {
        return Vec{-(1.0 + K1) - 2.0 * theta * x1[0]};
    };
    cert.alpha = [K1](double s) { return 2.0 * K1 * s; };
    cert.Psi = [theta](const Vec& x1, double) { return theta * (1.0 + std::abs(x1[0])); };
    cert.eps = d.eps_max;
    // paper rounding of M_min to 4 decimals, kept as the golden value
    cert.M = std::round(d.M_min * 1e4) / 1e4;
    return validate_certificate(cert);
}

ExampleInstance make_example_instance(double theta, double K1) {
    ExampleInstance inst;
    inst.theta = theta;
    inst.K1 = K1;
    const DerivedConstants d = derived_constants(theta, K1);
    inst.eps = d.eps_max;
    inst.M_min = d.M_min;
    inst.M = std::round(d.M_min * 1e4) / 1e4;
    inst.plant = make_example_plant(theta);
    inst.cert = make_example_certificate(theta, K1);
    return inst;
}

LmiCertificate golden_certificate() {
    const Mat P(2, 2, {16.1210, 7.8345, 7.8345, 4.9138});
    const Mat K(1, 2, {-11.2361, -6.6087});
    const Mat W = solve_spd(P, Mat::identity(2));
    const Mat H = W * transpose(K);
    return make_certificate(symmetrize(W), H);
}

double obstruction_second_difference(double theta, double K1, double x1, double x2, double u,
                                     double du) {
    auto E = [&](double uu) {
        const double psi1 = -(1.0 + K1) * x1 - theta * x1 * x1;
        return -K1 * x1 * x1 + x1 * theta * (1.0 + x1) * std::sin(uu) +
               (x2 - psi1) * (uu + 0.5 * x1 +
                              (1.0 + K1 + 2.0 * theta * K1 * x1) *
                                  (x1 + x2 + theta * (x1 * x1 + (1.0 + x1) * std::sin(uu))));
    };
    return E(u + du) - 2.0 * E(u) + E(u - du);
}

std::string instance_to_json(const ExampleInstance& inst) {
    nlohmann::json j;
    j["theta"] = inst.theta;
    j["K1"] = inst.K1;
    j["eps"] = inst.eps;
    j["M"] = inst.M;
    j["M_min"] = inst.M_min;
    j["mu"] = inst.mu;
    j["mu_u"] = inst.mu_u;
    j["K_V"] = inst.K_V;
    j["a"] = inst.a;
    j["c"] = inst.c;
    j["c_tilde"] = inst.c_tilde;
    return j.dump(2);
}

}  // namespace hybstab
