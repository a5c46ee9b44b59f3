#pragma once

#include <cmath>

#include "hybstab/backstepping.hpp"
#include "hybstab/hybrid.hpp"
#include "hybstab/local_synthesis.hpp"
#include "hybstab/plant.hpp"

// The worked planar benchmark
//   x1' = x1 + x2 + theta [x1^2 + (1+x1) sin u],   x2' = u
// with its certificate family V1 = x1^2/2, psi1 = -(1+K1)x1 - theta x1^2,
// alpha(s) = 2 K1 s, Psi = theta (1+|x1|), and all derived constants.

namespace hybstab {

struct ExampleInstance {
    double theta = 0.1;
    double K1 = 0.5;
    double eps = 0.7;
    double M = 0.0714;      // rounded golden; M_min carries full precision
    double M_min = 0.0;
    Vec mu = {1.0, 2.0};
    double mu_u = 2.0 * M_PI;
    double K_V = 1.6286e3;
    double a = 0.01;
    double c = 10.0;
    double c_tilde = 0.75;

    ControlAffinePlant plant;
    BoundsCertificate cert;
};

struct K1Window {
    double lower = 0.0;
    double upper = 0.0;
    bool empty() const { return lower >= upper; }
};

// lower = (theta/2)(1/mu1^2 + 3), upper = mu2/mu1 - 2*theta*mu1 - 1.
K1Window k1_window(double theta, const Vec& mu);

struct DerivedConstants {
    double eps_max = 0.0;  // 1 - 3*theta/(2*K1)
    double M_min = 0.0;    // theta/(4*K1*eps_max)
};

DerivedConstants derived_constants(double theta, double K1);

ControlAffinePlant make_example_plant(double theta);
BoundsCertificate make_example_certificate(double theta, double K1);

// Fully wired instance; constants recomputed from the formulas, with the
// literal golden values retained for theta = 0.1, K1 = 0.5.
ExampleInstance make_example_instance(double theta = 0.1, double K1 = 0.5);

// The published solver output for the theta = 0.1 instance, verbatim:
// P = [[16.1210, 7.8345], [7.8345, 4.9138]], K = [-11.2361, -6.6087],
// with W = P^{-1} and H = W K'.
LmiCertificate golden_certificate();

// Second u-difference of the obstruction function E(x1, x2, u): nonzero
// because the Lie-derivative bound is non-affine in u, which is what blocks
// the classical backstepping cancellation.
double obstruction_second_difference(double theta, double K1, double x1, double x2, double u,
                                     double du);

std::string instance_to_json(const ExampleInstance& inst);

}  // namespace hybstab
