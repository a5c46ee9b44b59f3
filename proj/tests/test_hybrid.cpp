#include <doctest.h>

#include <cmath>

#include "hybstab/backstepping.hpp"
#include "hybstab/bench_example.hpp"
#include "hybstab/hybrid.hpp"

using namespace hybstab;

namespace {

struct BenchLoop {
    ControlAffinePlant plant = make_example_plant(0.1);
    BoundsCertificate cert = make_example_certificate(0.1, 0.5);
    BacksteppingController global;
    LocalHybridController local = certificate_to_local_controller(golden_certificate());
    SupervisorController sup;

    explicit BenchLoop(double c_tilde = 0.75, bool skip_validation = false) {
        global = make_backstepping(plant, cert, 1.6286e3, 0.01, cert.M + 0.002, 10.0);
        AttractorSamplingConfig sampling;
        sampling.ball_radius = 0.01;
        sup = build_supervisor(
            plant, local, [this](const Vec& x) { return phi_g(global, x); }, c_tilde, &cert,
            sampling, skip_validation);
    }
};

IntegratorConfig fast_config() {
    IntegratorConfig cfg;
    cfg.max_step = 1e-2;
    cfg.rel_tol = 1e-7;
    return cfg;
}

// unit-lyapunov local controller for exercising the jump-map branches exactly
LocalHybridController unit_local() {
    LocalHybridController ctl;
    ctl.modes = {1};
    ctl.c_level = 1.0;
    ctl.lyapunov = [](int, const Vec& x) { return x[0] * x[0] + x[1] * x[1]; };
    ctl.in_flow = [&](int, const Vec& x) { return x[0] * x[0] + x[1] * x[1] <= 1.0; };
    ctl.in_jump = [&](int, const Vec& x) { return x[0] * x[0] + x[1] * x[1] >= 1.0; };
    ctl.feedback = [](int, const Vec&) { return 0.0; };
    ctl.jump = [](int q, const Vec&) { return std::vector<int>{q}; };
    return ctl;
}

}  // namespace

TEST_CASE("certificate_to_local_controller wraps the quadratic data") {
    auto cert = golden_certificate();
    auto ctl = certificate_to_local_controller(cert);
    REQUIRE(ctl.modes == std::vector<int>{1});
    CHECK(ctl.c_level == 1.0);
    CHECK(ctl.lyapunov(1, {0.0, 0.0}) == doctest::Approx(0.0));

    const Vec x{0.2, -0.1};
    const double v = 16.1210 * 0.04 + 2.0 * 7.8345 * 0.2 * (-0.1) + 4.9138 * 0.01;
    CHECK(ctl.lyapunov(1, x) == doctest::Approx(v).epsilon(1e-10));
    CHECK(ctl.feedback(1, x) == doctest::Approx(-11.2361 * 0.2 + 6.6087 * 0.1).epsilon(1e-10));
    CHECK(ctl.in_flow(1, x));
    CHECK_FALSE(ctl.in_jump(1, x));
    CHECK(ctl.in_jump(1, {1.0, 1.0}));
    CHECK(ctl.jump_indicator(1, {1.0, 1.0}) < 0.0);
    CHECK(ctl.jump(1, x) == std::vector<int>{1});

    // gradient against finite differences
    const Vec g = ctl.lyapunov_grad(1, x);
    const double h = 1e-6;
    CHECK(g[0] == doctest::Approx((ctl.lyapunov(1, {x[0] + h, x[1]}) -
                                   ctl.lyapunov(1, {x[0] - h, x[1]})) /
                                  (2 * h))
                      .epsilon(1e-6));
    CHECK(g[1] == doctest::Approx((ctl.lyapunov(1, {x[0], x[1] + h}) -
                                   ctl.lyapunov(1, {x[0], x[1] - h})) /
                                  (2 * h))
                      .epsilon(1e-6));
}

TEST_CASE("certificate_to_local_controller rejects unverified or indefinite data") {
    auto cert = golden_certificate();
    MarginReport failed;
    failed.pass = false;
    CHECK_THROWS_AS(certificate_to_local_controller(cert, &failed), structural_error);

    LmiCertificate bad;
    bad.W = Mat(2, 2, {1.0, 0.0, 0.0, -1.0});
    bad.P = bad.W;
    bad.H = Mat(2, 1);
    bad.K = Mat(1, 2);
    CHECK_THROWS_AS(certificate_to_local_controller(bad), structural_error);
}

TEST_CASE("build_supervisor validation") {
    CHECK_NOTHROW(BenchLoop{});  // c_tilde = 0.75 clears the attractor levels

    CHECK_THROWS_AS(BenchLoop{1.0}, std::invalid_argument);  // needs c_tilde < c_l

    // the attractor hull reaches V^l ~ 0.539, so 0.5 must be rejected
    try {
        BenchLoop loop{0.5};
        FAIL("expected supervisor_construction_error");
    } catch (const supervisor_construction_error& e) {
        REQUIRE(e.violating_sample.size() == 2);
        auto local = certificate_to_local_controller(golden_certificate());
        CHECK(local.lyapunov(1, e.violating_sample) >= 0.5);
    }

    CHECK_NOTHROW(BenchLoop(1.0, true));  // test hook bypasses both checks
}

TEST_CASE("supervisor flow and jump sets") {
    BenchLoop loop;
    const auto& sup = loop.sup;
    CHECK(sup.modes().size() == 2);  // (1,1) and (2,1)

    const Vec small{0.05, 0.0};   // V^l ~ 0.04
    const Vec large{1.0, 1.0};    // V^l ~ 36
    CHECK(sup.in_flow({1, 1}, small));
    CHECK_FALSE(sup.in_jump({1, 1}, small));
    CHECK_FALSE(sup.in_flow({1, 1}, large));
    CHECK(sup.in_jump({1, 1}, large));
    CHECK(sup.in_flow({2, 1}, large));
    CHECK_FALSE(sup.in_jump({2, 1}, large));
    CHECK(sup.in_jump({2, 1}, small));

    CHECK(sup.feedback({1, 1}, small) == doctest::Approx(loop.local.feedback(1, small)));
    CHECK(sup.feedback({2, 1}, small) == doctest::Approx(phi_g(loop.global, small)));
}

TEST_CASE("jump_map branch logic on the unit local controller") {
    ControlAffinePlant plant = make_example_plant(0.1);
    auto sup = build_supervisor(plant, unit_local(), [](const Vec&) { return 0.0; }, 0.75,
                                nullptr);

    // strictly outside Omega_{c_l}: route to the global mode only
    auto t1 = jump_map(sup, {1, 1}, {2.0, 0.0});
    REQUIRE(t1.size() == 1);
    CHECK(t1[0] == HybridMode{2, 1});

    // exactly on the boundary with the local jump set active: both branches
    auto t2 = jump_map(sup, {1, 1}, {1.0, 0.0});
    REQUIRE(t2.size() == 2);
    CHECK(t2[0] == HybridMode{1, 1});
    CHECK(t2[1] == HybridMode{2, 1});

    // global mode hand-back
    auto t3 = jump_map(sup, {2, 1}, {0.5, 0.0});
    REQUIRE(t3.size() == 1);
    CHECK(t3[0] == HybridMode{1, 1});

    CHECK_THROWS_AS(jump_map(sup, {1, 1}, {0.1, 0.0}), std::domain_error);
    CHECK_THROWS_AS(jump_map(sup, {2, 1}, {2.0, 0.0}), std::domain_error);
}

TEST_CASE("simulate: local basin run converges without jumps") {
    BenchLoop loop;
    auto arc = simulate(loop.sup, {0.1, -0.1}, {1, 1}, 40.0, 100, fast_config());
    CHECK(arc.reason == StopReason::converged);
    CHECK(arc.jumps.empty());
    auto m = arc_metrics(arc);
    CHECK(m.total_jumps == 0);
    CHECK(m.final_norm <= 2e-9);
    CHECK(std::isnan(m.first_switch_time));
}

TEST_CASE("simulate: hand-off from the global to the local mode") {
    BenchLoop loop;
    auto arc = simulate(loop.sup, {2.0, 0.0}, {2, 1}, 8.0, 100, fast_config());
    REQUIRE(arc.jumps.size() >= 1);
    const auto& jump = arc.jumps.front();
    CHECK(jump.q_before == HybridMode{2, 1});
    CHECK(jump.q_after == HybridMode{1, 1});
    // the switch fires on the c_tilde threshold
    CHECK(loop.local.lyapunov(1, jump.x) == doctest::Approx(0.75).epsilon(1e-6));
    CHECK(arc.jumps.size() == 1);
}

TEST_CASE("simulate: immediate jump when starting inside the hand-back set") {
    BenchLoop loop;
    auto arc = simulate(loop.sup, {0.05, 0.0}, {2, 1}, 5.0, 100, fast_config());
    REQUIRE(arc.jumps.size() == 1);
    CHECK(arc.jumps.front().t == 0.0);
    CHECK(arc.jumps.front().q_after == HybridMode{1, 1});
}

TEST_CASE("simulate: c_tilde = c_l test hook terminates as Zeno") {
    BenchLoop loop(1.0, true);
    auto arc = simulate(loop.sup, {0.5, 0.0}, {2, 1}, 10.0, 1000, fast_config());
    CHECK(arc.reason == StopReason::zeno);
    CHECK_FALSE(arc.detail.empty());
}

TEST_CASE("arc well-formedness invariants") {
    BenchLoop loop;
    auto arc = simulate(loop.sup, {2.0, 0.0}, {2, 1}, 8.0, 100, fast_config());
    REQUIRE(!arc.samples.empty());
    for (std::size_t k = 1; k < arc.samples.size(); ++k) {
        const auto& prev = arc.samples[k - 1];
        const auto& cur = arc.samples[k];
        CHECK(cur.t >= prev.t);
        CHECK(cur.j >= prev.j);
        CHECK(cur.j - prev.j <= 1);
        if (cur.j == prev.j) CHECK(cur.q == prev.q);
    }
    for (const auto& jr : arc.jumps) {
        CHECK(jr.t >= 0.0);
        CHECK(!(jr.q_before == jr.q_after));
    }
}

TEST_CASE("simulate is deterministic and the CSV is byte-identical across runs") {
    BenchLoop loop_a;
    BenchLoop loop_b;
    auto arc_a = simulate(loop_a.sup, {2.0, 0.0}, {2, 1}, 5.0, 100, fast_config());
    auto arc_b = simulate(loop_b.sup, {2.0, 0.0}, {2, 1}, 5.0, 100, fast_config());
    const std::string csv_a = arc_to_csv(arc_a);
    const std::string csv_b = arc_to_csv(arc_b);
    CHECK(csv_a == csv_b);
    CHECK(csv_a.rfind("t,j,x1,x2,q1,q2,u\n", 0) == 0);
}

TEST_CASE("arc_metrics bookkeeping") {
    BenchLoop loop;
    auto arc = simulate(loop.sup, {2.0, 0.0}, {2, 1}, 8.0, 100, fast_config());
    auto m = arc_metrics(arc);
    CHECK(m.total_jumps == static_cast<int>(arc.jumps.size()));
    CHECK(m.first_switch_time == doctest::Approx(arc.jumps.front().t));
    CHECK(m.final_time == doctest::Approx(arc.samples.back().t));
    double covered = 0.0;
    for (const auto& [mode, dur] : m.mode_durations) covered += dur;
    CHECK(covered == doctest::Approx(m.final_time).epsilon(1e-9));
    CHECK(m.mode_durations.count({2, 1}) == 1);
    CHECK(m.mode_durations.count({1, 1}) == 1);

    HybridArc empty;
    CHECK_THROWS_AS(arc_metrics(empty), std::invalid_argument);
}

TEST_CASE("simulate_flow integrates a decoupled linear system accurately") {
    ControlAffinePlant p;
    p.n = 2;
    p.f1 = [](const Vec& x1, double) { return Vec{-x1[0]}; };
    p.f2 = [](const Vec&, double) { return 1.0; };
    p.h1 = [](const Vec&, double, double) { return Vec{0.0}; };
    p.h2 = [](const Vec&, double, double) { return 0.0; };
    p = validate_plant(p);

    auto arc = simulate_flow(p, [](const Vec& x) { return -x[1]; }, {1.0, 1.0}, 1.0);
    CHECK(arc.reason == StopReason::horizon);
    CHECK(arc.jumps.empty());
    const Vec& xf = arc.samples.back().x;
    CHECK(arc.samples.back().t == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(xf[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-7));
    CHECK(xf[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-7));
}
