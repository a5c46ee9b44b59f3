#include <doctest.h>

#include <cmath>

#include "hybstab/bench_example.hpp"
#include "hybstab/plant.hpp"

using namespace hybstab;

TEST_CASE("eval_dynamics on the benchmark plant") {
    auto p = make_example_plant(0.1);

    // x = (1, 0), u = pi/2: x1' = 1 + 0 + 0.1*(1 + 2*sin(pi/2)) = 1.3, x2' = u
    Vec dx = eval_dynamics(p, {1.0, 0.0}, M_PI_2);
    CHECK(dx[0] == doctest::Approx(1.3).epsilon(1e-12));
    CHECK(dx[1] == doctest::Approx(M_PI_2).epsilon(1e-12));

    // x = (0, 1), u = 0
    Vec dx2 = eval_dynamics(p, {0.0, 1.0}, 0.0);
    CHECK(dx2[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dx2[1] == doctest::Approx(0.0));

    CHECK_THROWS_AS(eval_dynamics(p, {1.0, 2.0, 3.0}, 0.0), dimension_error);
}

TEST_CASE("validate_plant rejects a shifted equilibrium and vanishing f2 throws") {
    ControlAffinePlant p = make_example_plant(0.1);
    p.f1 = [](const Vec& x1, double x2) { return Vec{x1[0] + x2 + 0.5}; };
    CHECK_THROWS_AS(validate_plant(p), structural_error);

    ControlAffinePlant q = make_example_plant(0.1);
    q.f2 = [](const Vec& x1, double) { return x1[0]; };
    CHECK_THROWS_AS(eval_dynamics(q, {0.0, 1.0}, 1.0), structural_error);
}

TEST_CASE("split helpers") {
    Vec x{1.0, 2.0, 3.0};
    CHECK(split_x1(x) == Vec{1.0, 2.0});
    CHECK(split_x2(x) == 3.0);
}

TEST_CASE("finite-difference partials agree with the closed forms") {
    auto p = make_example_plant(0.1);
    ControlAffinePlant fd = p;
    fd.df1_dx2 = nullptr;
    fd.dh1_dx2 = nullptr;
    fd.dfh_dx = nullptr;
    fd.dfh_du = nullptr;

    const Vec x{0.7, -1.3};
    const Vec x1 = split_x1(x);
    const double u = 1.1;

    CHECK(eval_df1_dx2(fd, x1, x[1])[0] ==
          doctest::Approx(eval_df1_dx2(p, x1, x[1])[0]).epsilon(1e-7));
    CHECK(eval_dh1_dx2(fd, x1, x[1], u)[0] ==
          doctest::Approx(eval_dh1_dx2(p, x1, x[1], u)[0]).epsilon(1e-7));

    const Mat ja = eval_dfh_dx(fd, x, u);
    const Mat jb = eval_dfh_dx(p, x, u);
    CHECK(max_abs(ja - jb) <= 1e-6);

    const Vec ga = eval_dfh_du(fd, x, u);
    const Vec gb = eval_dfh_du(p, x, u);
    CHECK(std::abs(ga[0] - gb[0]) <= 1e-6);
    CHECK(std::abs(ga[1] - gb[1]) <= 1e-6);
}

TEST_CASE("validate_certificate rejects malformed data") {
    auto good = make_example_certificate(0.1, 0.5);
    CHECK_NOTHROW(validate_certificate(good));

    auto bad = good;
    bad.eps = 1.0;
    CHECK_THROWS_AS(validate_certificate(bad), structural_error);

    bad = good;
    bad.M = 0.0;
    CHECK_THROWS_AS(validate_certificate(bad), structural_error);

    bad = good;
    bad.alpha = [](double) { return 0.0; };
    CHECK_THROWS_AS(validate_certificate(bad), structural_error);

    bad = good;
    bad.V1 = [](const Vec& x1) { return -x1[0] * x1[0]; };  // V1(0) = 0 but not positive
    CHECK_THROWS_AS(validate_certificate(bad), structural_error);
}

TEST_CASE("alpha_lipschitz of the benchmark alpha is 2*K1") {
    auto cert = make_example_certificate(0.1, 0.5);
    CHECK(alpha_lipschitz(cert, 5.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("attractor membership on and off the manifold") {
    auto cert = make_example_certificate(0.1, 0.5);
    const double rm = std::sqrt(2.0 * cert.M);  // 0.377888...
    CHECK(rm == doctest::Approx(0.377888).epsilon(1e-5));

    const Vec x1{rm};
    const Vec boundary{rm, cert.psi1(x1)};
    CHECK(boundary[1] == doctest::Approx(-0.58112).epsilon(1e-4));
    CHECK(attractor_contains(cert, boundary, 1e-9));
    CHECK(attractor_contains(cert, {0.0, 0.0}, 1e-12));
    CHECK_FALSE(attractor_contains(cert, {0.0, 0.1}, 1e-3));
    CHECK_FALSE(attractor_contains(cert, {rm + 0.1, cert.psi1({rm + 0.1})}, 1e-3));
}

TEST_CASE("sublevel_radius of V1 = x1^2/2") {
    auto cert = make_example_certificate(0.1, 0.5);
    const double r = sublevel_radius(cert, cert.M);
    CHECK(r >= std::sqrt(2.0 * cert.M));
    CHECK(r <= 2.0 * std::sqrt(2.0 * cert.M) + 1.0);  // doubling bound, coarse by design
}

TEST_CASE("attractor_distance against a brute-force oracle") {
    auto cert = make_example_certificate(0.1, 0.5);

    CHECK(attractor_distance(cert, {0.0, cert.psi1({0.0})}) <= 1e-6);
    CHECK(attractor_distance(cert, {0.2, cert.psi1({0.2})}) <= 1e-6);

    const double rm = std::sqrt(2.0 * cert.M);
    for (Vec x : {Vec{0.0, 1.0}, Vec{0.0, 0.1}, Vec{1.0, -1.0}, Vec{-2.0, 3.0}}) {
        double best = 1e300;
        const int kN = 200000;
        for (int k = 0; k <= kN; ++k) {
            const double s = -rm + 2.0 * rm * k / kN;
            const double dx = x[0] - s;
            const double dy = x[1] - cert.psi1({s});
            best = std::min(best, dx * dx + dy * dy);
        }
        CHECK(attractor_distance(cert, x) == doctest::Approx(std::sqrt(best)).epsilon(1e-6));
    }

    CHECK_THROWS_AS(attractor_distance(cert, {1.0, 2.0, 3.0}), structural_error);
}

TEST_CASE("check_bounds_certificate accepts the benchmark pair") {
    auto p = make_example_plant(0.1);
    auto cert = make_example_certificate(0.1, 0.5);

    Box box{{-1.0, -2.0, -2.0 * M_PI}, {1.0, 2.0, 2.0 * M_PI}};
    const std::size_t res[] = {41, 21, 41};  // u grid hits pi/2 exactly
    auto report = check_bounds_certificate(p, cert, box, res);

    REQUIRE(report.items.size() == 5);
    CHECK(report.all_pass);
    for (const auto& item : report.items) CHECK(item.pass);

    // the published rounding of M leaves item b marginally negative at x1 = 1
    CHECK(report.items[2].min_slack == doctest::Approx(-2.0e-5).epsilon(0.1));
    // items a, b-norm, c, d hold with equality or better
    CHECK(report.items[0].min_slack >= -1e-10);
    CHECK(report.items[1].min_slack >= -1e-12);
    CHECK(report.items[3].min_slack >= -1e-12);
    CHECK(report.items[4].min_slack >= -1e-12);
}

TEST_CASE("check_bounds_certificate flags an eps beyond the admissible window") {
    auto p = make_example_plant(0.1);
    auto cert = make_example_certificate(0.1, 0.5);
    cert.eps = 0.99;  // > eps_max = 0.7

    Box box{{-1.0, -2.0, -2.0 * M_PI}, {1.0, 2.0, 2.0 * M_PI}};
    const std::size_t res[] = {41, 21, 41};
    auto report = check_bounds_certificate(p, cert, box, res);
    CHECK_FALSE(report.all_pass);
    CHECK_FALSE(report.items[2].pass);  // Lie part of item b
    CHECK(report.items[2].min_slack < -0.01);
}

TEST_CASE("check_bounds_certificate flags an unstabilized drift") {
    ControlAffinePlant p;
    p.n = 2;
    p.f1 = [](const Vec& x1, double) { return Vec{x1[0]}; };
    p.f2 = [](const Vec&, double) { return 1.0; };
    p.h1 = [](const Vec&, double, double) { return Vec{0.0}; };
    p.h2 = [](const Vec&, double, double) { return 0.0; };
    p = validate_plant(p);

    auto cert = make_example_certificate(0.1, 0.5);
    cert.psi1 = [](const Vec&) { return 0.0; };  // no stabilizing virtual control
    cert.grad_psi1 = [](const Vec&) { return Vec{0.0}; };

    Box box{{-1.0, -1.0, -1.0}, {1.0, 1.0, 1.0}};
    const std::size_t res[] = {21, 5, 5};
    auto report = check_bounds_certificate(p, cert, box, res);
    CHECK_FALSE(report.items[0].pass);  // L_f1 V1 = x1^2 > 0 along psi1 = 0
    CHECK(report.items[0].min_slack < -0.5);
}

TEST_CASE("check_bounds_certificate pass threshold is monotone in pass_tol") {
    auto p = make_example_plant(0.1);
    auto cert = make_example_certificate(0.1, 0.5);
    Box box{{-1.0, -2.0, -2.0 * M_PI}, {1.0, 2.0, 2.0 * M_PI}};
    const std::size_t res[] = {41, 11, 41};
    CHECK_FALSE(check_bounds_certificate(p, cert, box, res, 1e-9).all_pass);
    CHECK(check_bounds_certificate(p, cert, box, res, 1e-4).all_pass);
}
