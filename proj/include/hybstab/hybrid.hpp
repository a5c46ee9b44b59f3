#pragma once

#include <limits>
#include <map>
#include <string>

#include "hybstab/local_synthesis.hpp"
#include "hybstab/plant.hpp"

// Hybrid closed loop: flow sets, jump sets, hysteresis supervisor and an
// event-detecting adaptive Runge-Kutta simulator producing hybrid arcs.

namespace hybstab {

struct HybridMode {
    int i = 1;     // 1: local controller active, 2: global controller active
    int qhat = 1;  // local controller mode
    friend bool operator==(const HybridMode&, const HybridMode&) = default;
    friend auto operator<=>(const HybridMode&, const HybridMode&) = default;
};

// Local hybrid controller (mode set, per-mode flow/jump sets, feedback,
// jump map, Lyapunov function, shared level).
struct LocalHybridController {
    std::vector<int> modes;
    std::function<bool(int qhat, const Vec& x)> in_flow;
    std::function<bool(int qhat, const Vec& x)> in_jump;
    // scalar indicator: <= 0 iff x is in the local jump set (used for event
    // localization); optional when the jump map is the identity everywhere
    std::function<double(int qhat, const Vec& x)> jump_indicator;
    std::function<double(int qhat, const Vec& x)> feedback;
    std::function<std::vector<int>(int qhat, const Vec& x)> jump;
    std::function<double(int qhat, const Vec& x)> lyapunov;
    std::function<Vec(int qhat, const Vec& x)> lyapunov_grad;  // optional
    double c_level = 1.0;
};

// Wraps a verified LMI certificate as the Proposition-2 single-mode local
// controller: u = Kx, V(x) = x'Px, c = 1.  When a margin report is supplied
// it must have passed verification.
LocalHybridController certificate_to_local_controller(const LmiCertificate& cert,
                                                      const MarginReport* verified = nullptr);

struct SupervisorController {
    const ControlAffinePlant* plant = nullptr;
    LocalHybridController local;
    std::function<double(const Vec&)> phi_global;
    double c_level = 1.0;
    double c_tilde = 0.75;

    bool in_flow(const HybridMode& q, const Vec& x) const;
    bool in_jump(const HybridMode& q, const Vec& x) const;
    double feedback(const HybridMode& q, const Vec& x) const;
    std::vector<HybridMode> modes() const;
};

// Set-valued jump map of the hysteresis supervisor.  Throws
// std::domain_error when x is outside the jump set of q.
std::vector<HybridMode> jump_map(const SupervisorController& sup, const HybridMode& q,
                                 const Vec& x);

struct AttractorSamplingConfig {
    int attractor_samples = 256;
    int ball_directions = 8;
    double ball_radius = 0.0;  // radius a of the inflation; 0 = attractor only
};

struct supervisor_construction_error : std::runtime_error {
    Vec violating_sample;
    supervisor_construction_error(const std::string& msg, Vec sample)
        : std::runtime_error(msg), violating_sample(std::move(sample)) {}
};

// Builds the supervisor and validates max V^l over the sampled inflation of
// the attractor against c_tilde (>= 10^3 sample points).  Set
// skip_validation (test hook) to bypass, e.g. to drive c_tilde up to c_l.
SupervisorController build_supervisor(const ControlAffinePlant& plant,
                                      const LocalHybridController& local,
                                      std::function<double(const Vec&)> phi_global,
                                      double c_tilde, const BoundsCertificate* cert,
                                      const AttractorSamplingConfig& sampling = {},
                                      bool skip_validation = false);

enum class StopReason { horizon, jump_budget, converged, zeno, stiffness };

std::string to_string(StopReason r);

struct ArcSample {
    double t = 0.0;
    int j = 0;
    Vec x;
    HybridMode q;
    double u = 0.0;
};

struct JumpRecord {
    double t = 0.0;
    int j_before = 0;
    HybridMode q_before, q_after;
    Vec x;
};

struct HybridArc {
    std::vector<ArcSample> samples;
    std::vector<JumpRecord> jumps;
    StopReason reason = StopReason::horizon;
    std::string detail;
};

struct IntegratorConfig {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double min_step = 1e-12;
    double max_step = 1e-3;
    double initial_step = 1e-4;
    double event_tol = 1e-10;       // bisection tolerance on the membership indicator
    double convergence_norm = 1e-9;
};

HybridArc simulate(const SupervisorController& sup, const Vec& x0, const HybridMode& q0,
                   double t_horizon, int jump_budget = 100,
                   const IntegratorConfig& config = {});

// Plain flow of x' = f_h(x, u(x)) with no jumps, same integrator and arc
// bookkeeping (used for the pure global-controller loop).
HybridArc simulate_flow(const ControlAffinePlant& plant,
                        const std::function<double(const Vec&)>& feedback, const Vec& x0,
                        double t_horizon, const IntegratorConfig& config = {});

struct ArcMetrics {
    double first_switch_time = std::numeric_limits<double>::quiet_NaN();
    int total_jumps = 0;
    double final_norm = 0.0;
    double final_time = 0.0;
    std::map<std::pair<int, int>, double> mode_durations;  // (i, qhat) -> seconds
};

ArcMetrics arc_metrics(const HybridArc& arc);

// CSV with header t,j,x1,...,xn,q1,q2,u; 17 significant digits.
std::string arc_to_csv(const HybridArc& arc);

}  // namespace hybstab
