#include "hybstab/hybrid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

namespace hybstab {

namespace {

double norm2(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

LocalHybridController certificate_to_local_controller(const LmiCertificate& cert,
                                                      const MarginReport* verified) {
    if (verified && !verified->pass)
        throw structural_error("certificate_to_local_controller: certificate failed verification");
    if (!is_pd(cert.W, 0.0).positive_definite)
        throw structural_error("certificate_to_local_controller: W is not positive definite");

    const Mat P = cert.P;
    const Mat K = cert.K;
    auto lyap = [P](int, const Vec& x) {
        double v = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            for (std::size_t j = 0; j < x.size(); ++j) v += x[i] * P(i, j) * x[j];
        return v;
    };

    LocalHybridController ctl;
    ctl.modes = {1};
    ctl.c_level = cert.c_level;
    ctl.lyapunov = lyap;
    ctl.lyapunov_grad = [P](int, const Vec& x) {
        Vec g(x.size(), 0.0);
        for (std::size_t i = 0; i < x.size(); ++i)
            for (std::size_t j = 0; j < x.size(); ++j) g[i] += 2.0 * P(i, j) * x[j];
        return g;
    };
    const double c = cert.c_level;
    ctl.in_flow = [lyap, c](int q, const Vec& x) { return lyap(q, x) <= c; };
    ctl.in_jump = [lyap, c](int q, const Vec& x) { return lyap(q, x) >= c; };
    ctl.jump_indicator = [lyap, c](int q, const Vec& x) { return c - lyap(q, x); };
    ctl.feedback = [K](int, const Vec& x) {
        double u = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) u += K(0, i) * x[i];
        return u;
    };
    ctl.jump = [](int q, const Vec&) { return std::vector<int>{q}; };  // g^l == identity
    return ctl;
}

bool SupervisorController::in_flow(const HybridMode& q, const Vec& x) const {
    const double v = local.lyapunov(q.qhat, x);
    if (q.i == 1) return v <= c_level && local.in_flow(q.qhat, x);
    return v >= c_tilde;
}

bool SupervisorController::in_jump(const HybridMode& q, const Vec& x) const {
    const double v = local.lyapunov(q.qhat, x);
    if (q.i == 1) return v >= c_level || (v <= c_level && local.in_jump(q.qhat, x));
    return v <= c_tilde;
}

double SupervisorController::feedback(const HybridMode& q, const Vec& x) const {
    return q.i == 1 ? local.feedback(q.qhat, x) : phi_global(x);
}

std::vector<HybridMode> SupervisorController::modes() const {
    std::vector<HybridMode> out;
    for (int qh : local.modes) {
        out.push_back({1, qh});
        out.push_back({2, qh});
    }
    return out;
}

std::vector<HybridMode> jump_map(const SupervisorController& sup, const HybridMode& q,
                                 const Vec& x) {
    if (!sup.in_jump(q, x)) throw std::domain_error("jump_map: x is outside the jump set");
    if (q.i == 2) return {{1, q.qhat}};

    const double v = sup.local.lyapunov(q.qhat, x);
    std::vector<HybridMode> targets;
    if (v < sup.c_level || (v == sup.c_level && sup.local.in_jump(q.qhat, x))) {
        if (sup.local.in_jump(q.qhat, x))
            for (int g : sup.local.jump(q.qhat, x)) targets.push_back({1, g});
    }
    if (v >= sup.c_level) targets.push_back({2, q.qhat});
    return targets;
}

SupervisorController build_supervisor(const ControlAffinePlant& plant,
                                      const LocalHybridController& local,
                                      std::function<double(const Vec&)> phi_global,
                                      double c_tilde, const BoundsCertificate* cert,
                                      const AttractorSamplingConfig& sampling,
                                      bool skip_validation) {
    if (!(c_tilde > 0.0 && c_tilde < local.c_level) && !skip_validation)
        throw std::invalid_argument("build_supervisor: need 0 < c_tilde < c_l");

    SupervisorController sup;
    sup.plant = &plant;
    sup.local = local;
    sup.phi_global = std::move(phi_global);
    sup.c_level = local.c_level;
    sup.c_tilde = c_tilde;

    if (cert && !skip_validation) {
        // max V^l over the sampled inflation A + a*B1 must stay below c_tilde
        const double r = sublevel_radius(*cert, cert->M);
        for (int k = 0; k <= sampling.attractor_samples; ++k) {
            const double s = -r + 2.0 * r * k / sampling.attractor_samples;
            const Vec x1{s};
            if (cert->V1(x1) > cert->M) continue;
            const Vec base{s, cert->psi1(x1)};
            std::vector<Vec> pts{base};
            if (sampling.ball_radius > 0.0) {
                for (int d = 0; d < sampling.ball_directions; ++d) {
                    const double ang = 2.0 * M_PI * d / sampling.ball_directions;
                    pts.push_back({base[0] + sampling.ball_radius * std::cos(ang),
                                   base[1] + sampling.ball_radius * std::sin(ang)});
                }
            }
            for (const auto& p : pts)
                for (int qh : local.modes)
                    if (local.lyapunov(qh, p) >= c_tilde)
                        throw supervisor_construction_error(
                            "build_supervisor: V^l reaches c_tilde on the sampled attractor inflation",
                            p);
        }
    }
    return sup;
}

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::horizon: return "horizon";
        case StopReason::jump_budget: return "jump_budget";
        case StopReason::converged: return "converged";
        case StopReason::zeno: return "zeno";
        case StopReason::stiffness: return "stiffness";
    }
    return "unknown";
}

namespace {

// Dormand-Prince 5(4) embedded pair
struct RkStep {
    Vec x_new;
    Vec f_new;  // FSAL stage
    double error = 0.0;
};

RkStep dopri5_step(const std::function<Vec(const Vec&)>& rhs, const Vec& x, const Vec& f0,
                   double h, const IntegratorConfig& cfg) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    (void)c2;
    (void)c3;
    (void)c4;
    (void)c5;

    const std::size_t n = x.size();
    auto axpy = [n](const Vec& base, double hh, std::initializer_list<std::pair<double, const Vec*>> terms) {
        Vec out = base;
        for (auto [w, v] : terms)
            for (std::size_t i = 0; i < n; ++i) out[i] += hh * w * (*v)[i];
        return out;
    };

    const Vec k1 = f0;
    const Vec k2 = rhs(axpy(x, h, {{a21, &k1}}));
    const Vec k3 = rhs(axpy(x, h, {{a31, &k1}, {a32, &k2}}));
    const Vec k4 = rhs(axpy(x, h, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
    const Vec k5 = rhs(axpy(x, h, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
    const Vec k6 = rhs(axpy(x, h, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
    const Vec x5 = axpy(x, h, {{b1, &k1}, {b3, &k3}, {b4, &k4}, {b5, &k5}, {b6, &k6}});
    const Vec k7 = rhs(x5);

    RkStep step;
    step.x_new = x5;
    step.f_new = k7;
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                               e7 * k7[i]);
        const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(x[i]), std::abs(x5[i]));
        err += (ei / sc) * (ei / sc);
    }
    step.error = std::sqrt(err / n);
    return step;
}

Vec hermite(const Vec& x0, const Vec& f0, const Vec& x1, const Vec& f1, double h, double th) {
    const std::size_t n = x0.size();
    const double t2 = th * th, t3 = t2 * th;
    const double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + th;
    const double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
    Vec out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = h00 * x0[i] + h10 * h * f0[i] + h01 * x1[i] + h11 * h * f1[i];
    return out;
}

struct EventTrigger {
    std::function<double(const Vec&)> indicator;  // <= 0: jump region entered
};

}  // namespace

namespace detail {

// Shared flow-with-events loop.  `triggers` may be empty (pure flow).
// `resolve_jump` returns the post-jump mode for a productive jump, or
// nothing when every enabled branch is an identity jump.
HybridArc run_simulation(const ControlAffinePlant& plant,
                         const std::function<double(const HybridMode&, const Vec&)>& feedback,
                         const std::function<std::vector<EventTrigger>(const HybridMode&)>& triggers_of,
                         const std::function<std::optional<HybridMode>(const HybridMode&, const Vec&)>& resolve_jump,
                         const Vec& x0, const HybridMode& q0, double t_horizon, int jump_budget,
                         int zeno_threshold, const IntegratorConfig& cfg) {
    HybridArc arc;
    double t = 0.0;
    int j = 0;
    Vec x = x0;
    HybridMode q = q0;

    auto record = [&](double u) { arc.samples.push_back({t, j, x, q, u}); };

    double last_jump_t = -1.0;
    int same_t_jumps = 0;

    auto process_jumps = [&]() -> bool {
        // returns false when the arc must stop
        for (;;) {
            const auto target = resolve_jump ? resolve_jump(q, x) : std::nullopt;
            if (!target) return true;
            if (j >= jump_budget) {
                arc.reason = StopReason::jump_budget;
                return false;
            }
            if (t == last_jump_t) {
                if (++same_t_jumps > zeno_threshold) {
                    arc.reason = StopReason::zeno;
                    arc.detail = "more than " + std::to_string(zeno_threshold) +
                                 " jumps at t=" + std::to_string(t);
                    return false;
                }
            } else {
                last_jump_t = t;
                same_t_jumps = 1;
            }
            arc.jumps.push_back({t, j, q, *target, x});
            q = *target;
            ++j;
            record(feedback(q, x));
        }
    };

    record(feedback(q, x));
    if (!process_jumps()) return arc;

    double h = std::min(cfg.initial_step, cfg.max_step);
    auto rhs = [&](const Vec& xs) { return eval_dynamics(plant, xs, feedback(q, xs)); };

    while (t < t_horizon) {
        if (norm2(x) <= cfg.convergence_norm) {
            arc.reason = StopReason::converged;
            return arc;
        }
        if (t_horizon - t < cfg.min_step) break;
        h = std::min(h, t_horizon - t);
        Vec f0 = rhs(x);

        RkStep step;
        for (;;) {
            step = dopri5_step(rhs, x, f0, h, cfg);
            if (step.error <= 1.0) break;
            h *= std::clamp(0.9 * std::pow(step.error, -0.2), 0.2, 1.0);
            if (h < cfg.min_step) {
                arc.reason = StopReason::stiffness;
                arc.detail = "step underflow at t=" + std::to_string(t);
                return arc;
            }
        }

        // event detection: earliest indicator crossing within the step
        double theta_event = 2.0;
        const auto triggers = triggers_of ? triggers_of(q) : std::vector<EventTrigger>{};
        for (const auto& trig : triggers) {
            const double e0 = trig.indicator(x);
            const double e1 = trig.indicator(step.x_new);
            if (e0 > 0.0 && e1 <= 0.0) {
                // keep e(lo) > 0 >= e(hi); land on the enabled side
                double lo = 0.0, hi = 1.0;
                for (int it = 0; it < 60; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const Vec xm = hermite(x, f0, step.x_new, step.f_new, h, mid);
                    const double em = trig.indicator(xm);
                    if (em <= 0.0 && -em <= cfg.event_tol) {
                        hi = mid;
                        break;
                    }
                    (em > 0.0 ? lo : hi) = mid;
                }
                theta_event = std::min(theta_event, hi);
            }
        }

        if (theta_event <= 1.0) {
            const Vec xe = hermite(x, f0, step.x_new, step.f_new, h, theta_event);
            t += theta_event * h;
            x = xe;
            record(feedback(q, x));
            if (!process_jumps()) return arc;
            h = std::min(cfg.initial_step, cfg.max_step);
            continue;
        }

        t += h;
        x = step.x_new;
        record(feedback(q, x));
        h = std::min(h * std::clamp(0.9 * std::pow(std::max(step.error, 1e-10), -0.2), 0.2, 5.0),
                     cfg.max_step);
    }
    arc.reason = StopReason::horizon;
    return arc;
}

}  // namespace detail

HybridArc simulate(const SupervisorController& sup, const Vec& x0, const HybridMode& q0,
                   double t_horizon, int jump_budget, const IntegratorConfig& config) {
    if (!sup.in_flow(q0, x0) && !sup.in_jump(q0, x0))
        throw std::domain_error("simulate: x0 is outside C_q0 and D_q0");

    const int zeno_threshold = 2 * static_cast<int>(sup.modes().size());

    auto triggers_of = [&](const HybridMode& q) {
        std::vector<EventTrigger> trig;
        const int qh = q.qhat;
        const auto& local = sup.local;
        if (q.i == 2) {
            const double ct = sup.c_tilde;
            trig.push_back({[&local, qh, ct](const Vec& x) { return local.lyapunov(qh, x) - ct; }});
        } else {
            const double cl = sup.c_level;
            trig.push_back({[&local, qh, cl](const Vec& x) { return cl - local.lyapunov(qh, x); }});
            if (local.jump_indicator)
                trig.push_back({[&local, qh](const Vec& x) { return local.jump_indicator(qh, x); }});
        }
        return trig;
    };

    // Deterministic jump policy with the jump sets thickened by event_tol:
    // event localization lands within event_tol of the threshold, so exact
    // membership would miss the boundary.  Prefers the (1, g(x)) branch and
    // suppresses identity jumps.  With degenerate hysteresis (c~ = c_l) the
    // thickened sets overlap and the Zeno guard terminates the loop.
    const double jump_tol = config.event_tol;
    auto resolve_jump = [&, jump_tol](const HybridMode& q,
                                      const Vec& x) -> std::optional<HybridMode> {
        const double v = sup.local.lyapunov(q.qhat, x);
        if (q.i == 2) {
            if (v <= sup.c_tilde + jump_tol) return HybridMode{1, q.qhat};
            return std::nullopt;
        }
        if (v <= sup.c_level + jump_tol && sup.local.in_jump(q.qhat, x))
            for (int g : sup.local.jump(q.qhat, x))
                if (g != q.qhat) return HybridMode{1, g};
        if (v >= sup.c_level - jump_tol) return HybridMode{2, q.qhat};
        return std::nullopt;
    };

    auto feedback = [&](const HybridMode& q, const Vec& x) { return sup.feedback(q, x); };

    return detail::run_simulation(*sup.plant, feedback, triggers_of, resolve_jump, x0, q0,
                                  t_horizon, jump_budget, zeno_threshold, config);
}

HybridArc simulate_flow(const ControlAffinePlant& plant,
                        const std::function<double(const Vec&)>& feedback, const Vec& x0,
                        double t_horizon, const IntegratorConfig& config) {
    auto fb = [&](const HybridMode&, const Vec& x) { return feedback(x); };
    return detail::run_simulation(plant, fb, nullptr, nullptr, x0, HybridMode{0, 0}, t_horizon,
                                  0, 1, config);
}

ArcMetrics arc_metrics(const HybridArc& arc) {
    if (arc.samples.empty()) throw std::invalid_argument("arc_metrics: empty arc");
    ArcMetrics m;
    m.total_jumps = static_cast<int>(arc.jumps.size());
    if (!arc.jumps.empty()) m.first_switch_time = arc.jumps.front().t;
    m.final_norm = norm2(arc.samples.back().x);
    m.final_time = arc.samples.back().t;
    for (std::size_t k = 0; k + 1 < arc.samples.size(); ++k) {
        const auto& s = arc.samples[k];
        const auto& next = arc.samples[k + 1];
        m.mode_durations[{s.q.i, s.q.qhat}] += next.t - s.t;
    }
    return m;
}

std::string arc_to_csv(const HybridArc& arc) {
    std::ostringstream out;
    const std::size_t n = arc.samples.empty() ? 0 : arc.samples.front().x.size();
    out << "t,j";
    for (std::size_t i = 1; i <= n; ++i) out << ",x" << i;
    out << ",q1,q2,u\n";
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    for (const auto& s : arc.samples) {
        put(s.t);
        out << ',' << s.j;
        for (double xi : s.x) {
            out << ',';
            put(xi);
        }
        out << ',' << s.q.i << ',' << s.q.qhat << ',';
        put(s.u);
        out << '\n';
    }
    return out.str();
}

}  // namespace hybstab
