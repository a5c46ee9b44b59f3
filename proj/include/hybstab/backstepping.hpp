#pragma once

#include "hybstab/plant.hpp"

// Global practical stabilizer.  The feedback
//   phi_g = (1/(K_V f2)) [ K_V L_f1 psi1 - dV1 . int_0^1 d_x2 f1(x1, eta(s)) ds
//                          - (x2 - psi1)(c + (c/4) Delta^2) ]
// renders a sublevel set Omega_a'(V) of the composite Lyapunov function
//   V(x) = V1(x1) + K_V (x2 - psi1(x1))^2
// globally asymptotically stable, with Omega_a'(V) inside the a-inflation
// of the attractor A.

namespace hybstab {

struct search_failure : std::runtime_error {
    Vec counterexample;
    search_failure(const std::string& msg, Vec point)
        : std::runtime_error(msg), counterexample(std::move(point)) {}
};

struct BacksteppingController {
    const ControlAffinePlant* plant = nullptr;
    const BoundsCertificate* cert = nullptr;
    double K_V = 1.0;
    double a = 0.0;        // practical radius
    double a_prime = 0.0;  // sublevel threshold, > M
    double c = 1.0;        // damping gain, > 1 strictly
    double zeta = 0.0;     // level bounding A_{>=0}
    double c_g = 0.0;      // gain floor from the decrease estimate
    int quad_panels = 16;
};

// s-parameterized segment between psi1(x1) and x2.
double eta(const BoundsCertificate& cert, const Vec& x1, double x2, double s);

double delta(const BacksteppingController& ctl, const Vec& x1, double x2);

double phi_g(const BacksteppingController& ctl, const Vec& x);

double composite_V(const BacksteppingController& ctl, const Vec& x);
double composite_V_dot(const BacksteppingController& ctl, const Vec& x, double u);

struct InclusionSearchConfig {
    int boundary_samples = 600;       // x1 samples; two boundary points each
    double K_V_initial = 1.0;
    double K_V_ratio = 4.0;
    double K_V_max = 1e8;
    double delta_min = 1e-8;          // smallest sublevel excess considered feasible
    double bisect_rel_tol = 1e-3;
    // the search probes inclusion with radius a*a_safety so the accepted
    // excess is robust to denser boundary sampling at the full radius
    double a_safety = 0.8;
};

// True iff every sampled point of the boundary of Omega_{M+excess}(V) lies
// in A + a*B1.  On failure the violating point is written to *counterexample.
bool sublevel_inclusion_holds(const BoundsCertificate& cert, double K_V, double excess,
                              double a, int boundary_samples, Vec* counterexample = nullptr);

// Largest excess delta in (0, M] with Omega_{M+delta}(V) inside A + a*B1
// for a fixed K_V, found by bisection; negative when none exists.
double find_aprime_excess(const BoundsCertificate& cert, double K_V, double a,
                          const InclusionSearchConfig& config = {});

struct KvSearchResult {
    double K_V = 0.0;
    double a_prime = 0.0;
};

// Geometric schedule over K_V, bisection over the excess per candidate.
KvSearchResult find_KV_aprime(const BoundsCertificate& cert, double a,
                              const InclusionSearchConfig& config = {});

// zeta = max of V over the compact set
//   A_{>=0} = { eps*alpha(V1) + (x2-psi1)^2 <= eps*alpha(M) + 1 },
// computed by grid maximization (201 points per axis).
double compute_zeta(const BoundsCertificate& cert, double K_V, std::size_t grid = 201);

// c_g = max{ 1/(eps[alpha(a') - alpha(M)]), eps*K_V*K_alpha/2, 1 }.
double find_c_g(const BoundsCertificate& cert, double K_V, double a_prime);

// Assembles a controller from explicit constants (as the worked example
// supplies them).  Requires c > 1 with margin 1e-6 and a_prime > M; c_g and
// zeta are computed and recorded but c is not required to exceed c_g, which
// is sufficient and far from necessary.
BacksteppingController make_backstepping(const ControlAffinePlant& plant,
                                         const BoundsCertificate& cert, double K_V,
                                         double a, double a_prime, double c,
                                         int quad_panels = 16);

// Full synthesis path: searches (K_V, a'), then picks c just above c_g.
BacksteppingController synthesize_backstepping(const ControlAffinePlant& plant,
                                               const BoundsCertificate& cert, double a,
                                               const InclusionSearchConfig& config = {});

}  // namespace hybstab
