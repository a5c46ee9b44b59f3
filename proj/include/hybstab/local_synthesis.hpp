#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "hybstab/plant.hpp"

// Linear differential inclusion over-approximation around the origin and
// the LMI feasibility problem producing the local linear controller
// u = Kx with quadratic basin certificate V(x) = x'Px, P = W^{-1}, level 1.

namespace hybstab {

struct BoxNeighborhood {
    Vec mu;        // |x_i| <= mu_i
    double mu_u;   // |u| <= mu_u
};

struct LinearizationPair {
    Mat F;  // n x n
    Mat G;  // n x 1
};

struct EntryInterval {
    double lo = 0.0;
    double hi = 0.0;
    bool degenerate() const { return hi - lo < 1e-12; }
};

struct VertexFamily {
    std::vector<Mat> C_list;  // n x n vertices
    std::vector<Mat> D_list;  // n x 1 vertices
    std::vector<std::vector<EntryInterval>> C_intervals;  // [i][j]
    std::vector<EntryInterval> D_intervals;               // [i]
};

struct PolytopeHull {
    std::vector<Vec> vertices;
    double a_plus = 0.0;   // extrema of d psi1 on {V1 <= M} (scalar-x1 build)
    double a_minus = 0.0;
};

struct LmiCertificate {
    Mat W;  // n x n SPD
    Mat H;  // n x 1
    Mat P;  // W^{-1}
    Mat K;  // 1 x n, H' P
    double c_level = 1.0;
};

struct infeasibility_suspected : std::runtime_error {
    double best_margin;
    infeasibility_suspected(const std::string& msg, double margin)
        : std::runtime_error(msg), best_margin(margin) {}
};

LinearizationPair linearize(const ControlAffinePlant& plant);

// Interval per entry of the gradient of f~_h = f_h - Fx - Gu over
// V_mu x [-mu_u, mu_u] via grid extrema (inflated by `inflation` of the
// range); non-degenerate entries branch into 2^k sign combinations.
VertexFamily vertex_matrices(const ControlAffinePlant& plant, const LinearizationPair& pair,
                             const BoxNeighborhood& box, std::size_t resolution = 201,
                             double inflation = 0.02, std::size_t max_blocks = 4096);

// Mean-value construction of a 4-vertex hull of the attractor; scalar-x1
// certificates with V1 = x1^2/2 structure (radius sqrt(2M)).  Other shapes
// must supply vertices directly.
PolytopeHull hull_of_attractor(const BoundsCertificate& cert);

// Sign test of x against the convex hull of up to 4 planar vertices.
bool hull_contains(const PolytopeHull& hull, const Vec& x, double tol = 1e-9);

struct LmiBlock {
    std::string family;   // "stability", "box", "hull", "input"
    Mat block;            // symmetric
    bool strict_negative; // family 1 wants < 0; others want >= 0
};

std::vector<LmiBlock> assemble_lmis(const LinearizationPair& pair, const VertexFamily& family,
                                    const BoxNeighborhood& box, const PolytopeHull& hull,
                                    const Mat& W, const Mat& H);

struct MarginReport {
    // per family: stability margin is -lambda_max over blocks (>0 pass);
    // others are lambda_min over blocks (>= -1e-9 pass)
    std::map<std::string, double> family_margins;
    // Schur-reduced scalar checks
    std::vector<double> hull_vertex_levels;  // x_p' P x_p, want <= 1
    double input_energy = 0.0;               // K W K', want <= mu_u^2
    Vec box_diagonal;                        // W_ss, want <= mu_s^2
    bool pass = false;
};

MarginReport verify_certificate(const LmiCertificate& cert, const LinearizationPair& pair,
                                const VertexFamily& family, const BoxNeighborhood& box,
                                const PolytopeHull& hull, double psd_slack = 1e-9);

LmiCertificate make_certificate(const Mat& W, const Mat& H);

struct SynthesisConfig {
    int restarts = 60;
    int iterations = 4000;
    double target_margin = 1e-3;  // required decrease margin for the stability family
    std::uint64_t seed = 20240817;
};

// Projected-subgradient minimization of the worst LMI violation over (W, H),
// W projected to the SPD cone by eigenvalue clipping at 1e-6, with random
// restarts.  Returns the first iterate accepted by verify_certificate.
LmiCertificate synthesize(const LinearizationPair& pair, const VertexFamily& family,
                          const BoxNeighborhood& box, const PolytopeHull& hull,
                          const SynthesisConfig& config = {});

// JSON round-trip: {"W": [[...]], "H": [...], "margins": {...}}, 17
// significant digits.
std::string certificate_to_json(const LmiCertificate& cert, const MarginReport* report = nullptr);
LmiCertificate certificate_from_json(const std::string& text);

}  // namespace hybstab
