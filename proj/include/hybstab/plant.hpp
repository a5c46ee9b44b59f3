#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hybstab/numerics.hpp"

// Control-affine plant
//   x1' = f1(x1,x2) + h1(x1,x2,u)
//   x2' = f2(x1,x2)*u + h2(x1,x2,u)
// with x1 in R^{n-1}, x2 and u scalar, together with the bounds certificate
// (V1, psi1, alpha, Psi, eps, M) that defines the compact attractor
//   A = { V1(x1) <= M, x2 = psi1(x1) }.

namespace hybstab {

struct structural_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ControlAffinePlant {
    std::size_t n = 2;  // total state dimension; x1 has n-1 components

    std::function<Vec(const Vec& x1, double x2)> f1;
    std::function<double(const Vec& x1, double x2)> f2;
    std::function<Vec(const Vec& x1, double x2, double u)> h1;
    std::function<double(const Vec& x1, double x2, double u)> h2;

    // Optional closed-form partials; central finite differences with step
    // 1e-6*(1+|arg|) are used when absent.
    std::function<Vec(const Vec& x1, double x2)> df1_dx2;          // (n-1)-vector
    std::function<Vec(const Vec& x1, double x2, double u)> dh1_dx2;  // (n-1)-vector
    std::function<Mat(const Vec& x, double u)> dfh_dx;             // n x n
    std::function<Vec(const Vec& x, double u)> dfh_du;             // n-vector

    bool f1_affine_in_x2 = false;  // enables the exact one-point quadrature shortcut
};

// Validates the construction invariants (equilibrium at the origin within
// 1e-12) and returns the plant unchanged.
ControlAffinePlant validate_plant(ControlAffinePlant plant);

// x = (x1, x2) stacked.  Throws structural_error when f2 vanishes at x.
Vec eval_dynamics(const ControlAffinePlant& plant, const Vec& x, double u);

Vec split_x1(const Vec& x);
inline double split_x2(const Vec& x) { return x.back(); }

// Finite-difference helpers shared by the partial fall-backs.
double fd_step(double arg);

Vec eval_df1_dx2(const ControlAffinePlant& plant, const Vec& x1, double x2);
Vec eval_dh1_dx2(const ControlAffinePlant& plant, const Vec& x1, double x2, double u);
Mat eval_dfh_dx(const ControlAffinePlant& plant, const Vec& x, double u);
Vec eval_dfh_du(const ControlAffinePlant& plant, const Vec& x, double u);

struct BoundsCertificate {
    std::size_t x1_dim = 1;
    std::function<double(const Vec& x1)> V1;
    std::function<Vec(const Vec& x1)> grad_V1;     // FD fallback when absent
    std::function<double(const Vec& x1)> psi1;
    std::function<Vec(const Vec& x1)> grad_psi1;   // FD fallback when absent
    std::function<double(double)> alpha;           // class-K-infinity
    std::function<double(const Vec& x1, double x2)> Psi;
    double eps = 0.0;  // in (0,1)
    double M = 0.0;    // > 0
};

BoundsCertificate validate_certificate(BoundsCertificate cert);

Vec eval_grad_V1(const BoundsCertificate& cert, const Vec& x1);
Vec eval_grad_psi1(const BoundsCertificate& cert, const Vec& x1);

// Lipschitz constant of alpha on [0, hi], estimated from finite-difference
// slopes over `samples` points.
double alpha_lipschitz(const BoundsCertificate& cert, double hi, int samples = 10000);

// Membership test for A = { V1(x1) <= M, x2 = psi1(x1) }.
bool attractor_contains(const BoundsCertificate& cert, const Vec& x, double tol);

// Euclidean distance estimate from x to A.  Dense 1-D scan plus local
// refinement; only the scalar-x1 case (n = 2) is supported.
double attractor_distance(const BoundsCertificate& cert, const Vec& x);

// Radius r such that { V1 <= level } is contained in |x1| <= r (scalar x1),
// found by growing and bisecting.
double sublevel_radius(const BoundsCertificate& cert, double level);

struct AssumptionItemReport {
    std::string label;
    double min_slack = 0.0;  // >= 0 means the inequality held on the grid
    Vec worst_point;         // (x1..., x2, u) layout, unused trailing axes omitted
    bool pass = false;
};

struct BoundsCheckReport {
    std::vector<AssumptionItemReport> items;  // a, b-norm, b-lie, c, d
    bool all_pass = false;
};

// Samples the four certificate inequalities on a tensor grid over
// sample_box = (x1-axes..., x2, u).  Item a and the Lie part of item b are
// evaluated along x2 = psi1(x1), matching the way they enter the
// construction of the global controller.  Violations are report entries,
// never exceptions.
BoundsCheckReport check_bounds_certificate(const ControlAffinePlant& plant,
                                           const BoundsCertificate& cert,
                                           const Box& sample_box,
                                           std::span<const std::size_t> resolution,
                                           double pass_tol = 1e-4);

}  // namespace hybstab
