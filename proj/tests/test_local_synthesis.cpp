#include <doctest.h>

#include <cmath>
#include <random>

#include "hybstab/bench_example.hpp"
#include "hybstab/local_synthesis.hpp"

using namespace hybstab;

namespace {

BoxNeighborhood bench_box() { return {{1.0, 2.0}, 2.0 * M_PI}; }

}  // namespace

TEST_CASE("linearize the benchmark plant at the origin") {
    auto p = make_example_plant(0.1);
    auto pair = linearize(p);
    CHECK(pair.F(0, 0) == doctest::Approx(1.0));
    CHECK(pair.F(0, 1) == doctest::Approx(1.0));
    CHECK(pair.F(1, 0) == doctest::Approx(0.0));
    CHECK(pair.F(1, 1) == doctest::Approx(0.0));
    CHECK(pair.G(0, 0) == doctest::Approx(0.1));
    CHECK(pair.G(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("vertex_matrices recovers the analytic remainder intervals") {
    auto p = make_example_plant(0.1);
    auto pair = linearize(p);
    auto fam = vertex_matrices(p, pair, bench_box());

    // d f~/dx: only the (0,0) entry varies: 2*theta*x1 + theta*sin u
    CHECK(fam.C_intervals[0][0].lo == doctest::Approx(-0.3).epsilon(1e-3));
    CHECK(fam.C_intervals[0][0].hi == doctest::Approx(0.3).epsilon(1e-3));
    CHECK(fam.C_intervals[0][1].degenerate());
    CHECK(fam.C_intervals[1][0].degenerate());
    CHECK(fam.C_intervals[1][1].degenerate());

    // d f~/du: first entry theta*(1+x1)*cos u - 0.1
    CHECK(fam.D_intervals[0].lo == doctest::Approx(-0.3).epsilon(1e-3));
    CHECK(fam.D_intervals[0].hi == doctest::Approx(0.1).epsilon(1e-3));
    CHECK(fam.D_intervals[1].degenerate());

    // one varying entry each: two C vertices, two D vertices
    REQUIRE(fam.C_list.size() == 2);
    REQUIRE(fam.D_list.size() == 2);
    // vertices carry the 2%-inflated endpoints
    CHECK(std::abs(fam.C_list[0](0, 0)) == doctest::Approx(0.312).epsilon(1e-2));
    CHECK(std::abs(fam.C_list[1](0, 0)) == doctest::Approx(0.312).epsilon(1e-2));
    CHECK(fam.C_list[0](0, 0) < 0.0);
    CHECK(fam.C_list[1](0, 0) > 0.0);
    CHECK(fam.D_list[0](0, 0) == doctest::Approx(-0.308).epsilon(1e-2));
    CHECK(fam.D_list[1](0, 0) == doctest::Approx(0.108).epsilon(1e-1));
    CHECK(fam.D_list[0](1, 0) == doctest::Approx(0.0));
}

TEST_CASE("vertex_matrices honors the block cap") {
    auto p = make_example_plant(0.1);
    auto pair = linearize(p);
    CHECK_THROWS_AS(vertex_matrices(p, pair, bench_box(), 51, 0.02, 2), numerics_error);
}

TEST_CASE("hull_of_attractor vertices for the benchmark certificate") {
    auto cert = make_example_certificate(0.1, 0.5);
    auto hull = hull_of_attractor(cert);
    CHECK(hull.a_plus == doctest::Approx(-1.42442).epsilon(1e-4));
    CHECK(hull.a_minus == doctest::Approx(-1.57558).epsilon(1e-4));
    REQUIRE(hull.vertices.size() == 4);
    CHECK(hull.vertices[0][0] == doctest::Approx(0.377888).epsilon(1e-4));
    CHECK(hull.vertices[0][1] == doctest::Approx(-0.53828).epsilon(1e-3));
    CHECK(hull.vertices[1][1] == doctest::Approx(-0.59541).epsilon(1e-3));
}

TEST_CASE("hull contains the attractor") {
    auto cert = make_example_certificate(0.1, 0.5);
    auto hull = hull_of_attractor(cert);
    const double rm = std::sqrt(2.0 * cert.M);
    for (int k = 0; k <= 100; ++k) {
        const double s = -rm + 2.0 * rm * k / 100;
        CHECK(hull_contains(hull, {s, cert.psi1({s})}, 1e-9));
    }
    CHECK_FALSE(hull_contains(hull, {1.0, -1.6}));
    CHECK_FALSE(hull_contains(hull, {0.0, 0.2}));
}

TEST_CASE("assemble_lmis produces the expected block inventory") {
    auto p = make_example_plant(0.1);
    auto pair = linearize(p);
    auto fam = vertex_matrices(p, pair, bench_box());
    auto hull = hull_of_attractor(make_example_certificate(0.1, 0.5));
    auto cert = golden_certificate();
    auto blocks = assemble_lmis(pair, fam, bench_box(), hull, cert.W, cert.H);

    int stability = 0, box = 0, hull_b = 0, input = 0;
    for (const auto& b : blocks) {
        if (b.family == "stability") {
            ++stability;
            CHECK(b.strict_negative);
            CHECK(b.block.rows == 2);
            CHECK(max_abs(b.block - transpose(b.block)) <= 1e-14);
        } else if (b.family == "box") {
            ++box;
            CHECK(b.block.rows == 3);
        } else if (b.family == "hull") {
            ++hull_b;
        } else if (b.family == "input") {
            ++input;
        }
    }
    CHECK(stability == 4);  // 2 C vertices x 2 D vertices
    CHECK(box == 2);
    CHECK(hull_b == 4);
    CHECK(input == 1);
}

TEST_CASE("verify_certificate accepts the published solution") {
    auto p = make_example_plant(0.1);
    auto pair = linearize(p);
    auto fam = vertex_matrices(p, pair, bench_box());
    auto hull = hull_of_attractor(make_example_certificate(0.1, 0.5));
    auto cert = golden_certificate();
    auto rep = verify_certificate(cert, pair, fam, bench_box(), hull);

    CHECK(rep.pass);
    CHECK(rep.family_margins.at("stability") > 0.0);
    CHECK(rep.family_margins.at("box") >= -1e-9);
    CHECK(rep.family_margins.at("hull") >= -1e-9);
    CHECK(rep.family_margins.at("input") >= -1e-9);

    REQUIRE(rep.hull_vertex_levels.size() == 4);
    CHECK(rep.hull_vertex_levels[0] == doctest::Approx(0.5388).epsilon(2e-3));
    CHECK(rep.hull_vertex_levels[1] == doctest::Approx(0.5185).epsilon(2e-3));
    CHECK(rep.input_energy == doctest::Approx(9.02).epsilon(1e-2));
    CHECK(rep.input_energy <= bench_box().mu_u * bench_box().mu_u);
    CHECK(rep.box_diagonal[0] == doctest::Approx(0.2755).epsilon(1e-3));
    CHECK(rep.box_diagonal[1] == doctest::Approx(0.9039).epsilon(1e-3));
}

TEST_CASE("verify_certificate rejects the trivial guess") {
    auto p = make_example_plant(0.1);
    auto pair = linearize(p);
    auto fam = vertex_matrices(p, pair, bench_box());
    auto hull = hull_of_attractor(make_example_certificate(0.1, 0.5));
    auto cert = make_certificate(Mat::identity(2), Mat(2, 1));
    auto rep = verify_certificate(cert, pair, fam, bench_box(), hull);
    CHECK_FALSE(rep.pass);
    CHECK(rep.family_margins.at("stability") < 0.0);  // open-loop F is unstable
}

TEST_CASE("stability blocks are homogeneous of degree one in (W, H)") {
    auto p = make_example_plant(0.1);
    auto pair = linearize(p);
    auto fam = vertex_matrices(p, pair, bench_box());
    auto hull = hull_of_attractor(make_example_certificate(0.1, 0.5));
    auto cert = golden_certificate();

    auto b1 = assemble_lmis(pair, fam, bench_box(), hull, cert.W, cert.H);
    auto b2 = assemble_lmis(pair, fam, bench_box(), hull, 3.0 * cert.W, 3.0 * cert.H);
    for (std::size_t k = 0; k < b1.size(); ++k) {
        if (b1[k].family != "stability") continue;
        CHECK(max_abs(b2[k].block - 3.0 * b1[k].block) <= 1e-12);
    }
}

TEST_CASE("Schur-reduced scalars agree with the block eigenvalue tests") {
    auto box = bench_box();
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto p = make_example_plant(0.1);
    auto pair = linearize(p);
    auto fam = vertex_matrices(p, pair, box);
    auto hull = hull_of_attractor(make_example_certificate(0.1, 0.5));

    for (int rep_i = 0; rep_i < 20; ++rep_i) {
        Mat a(2, 2);
        for (double& v : a.a) v = unit(rng);
        Mat W = symmetrize(a * transpose(a) + 0.05 * Mat::identity(2));
        Mat H(2, 1, {2.0 * unit(rng), 2.0 * unit(rng)});
        auto cert = make_certificate(W, H);
        auto blocks = assemble_lmis(pair, fam, box, hull, W, H);
        auto report = verify_certificate(cert, pair, fam, box, hull);

        std::size_t bi = 0, hi = 0;
        for (const auto& blk : blocks) {
            if (blk.family == "stability") continue;
            const double lam = sym_eig(blk.block).eigenvalues.front();
            double slack = 0.0;
            if (blk.family == "box") {
                slack = box.mu[bi] * box.mu[bi] - report.box_diagonal[bi];
                ++bi;
            } else if (blk.family == "hull") {
                slack = 1.0 - report.hull_vertex_levels[hi];
                ++hi;
            } else {
                slack = box.mu_u * box.mu_u - report.input_energy;
            }
            // away from the boundary the block sign and the scalar sign agree
            if (slack > 1e-6) CHECK(lam >= -1e-9);
            if (slack < -1e-6) CHECK(lam < 1e-9);
        }
    }
}

TEST_CASE("certified level set stays inside the state and input boxes") {
    auto cert = golden_certificate();
    auto box = bench_box();
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
    for (int k = 0; k < 10000; ++k) {
        const double t = ang(rng);
        Vec d{std::cos(t), std::sin(t)};
        const Mat dv = Mat::col(d);
        const double q = (transpose(dv) * cert.P * dv)(0, 0);
        const double scale = 1.0 / std::sqrt(q);  // boundary of x'Px = 1
        const Vec x{scale * d[0], scale * d[1]};
        CHECK(std::abs(x[0]) <= box.mu[0] + 1e-9);
        CHECK(std::abs(x[1]) <= box.mu[1] + 1e-9);
        CHECK(std::abs(cert.K(0, 0) * x[0] + cert.K(0, 1) * x[1]) <= box.mu_u + 1e-9);
    }
}

TEST_CASE("make_certificate algebraic identities") {
    auto cert = golden_certificate();
    CHECK(max_abs(cert.P * cert.W - Mat::identity(2)) <= 1e-10);
    CHECK(max_abs(cert.K * cert.W - transpose(cert.H)) <= 1e-10);
    CHECK(cert.c_level == 1.0);
    CHECK(cert.K(0, 0) == doctest::Approx(-11.2361).epsilon(1e-6));
    CHECK(cert.K(0, 1) == doctest::Approx(-6.6087).epsilon(1e-6));
}

TEST_CASE("synthesize solves a scalar toy problem") {
    LinearizationPair pair{Mat(1, 1, {1.0}), Mat(1, 1, {1.0})};
    VertexFamily fam;
    fam.C_list = {Mat(1, 1)};
    fam.D_list = {Mat(1, 1)};
    fam.C_intervals = {{EntryInterval{}}};
    fam.D_intervals = {EntryInterval{}};
    BoxNeighborhood box{{1.0}, 10.0};
    PolytopeHull hull;
    hull.vertices = {{0.5}, {-0.5}};

    SynthesisConfig cfg;
    cfg.restarts = 5;
    cfg.iterations = 400;
    auto cert = synthesize(pair, fam, box, hull, cfg);
    auto rep = verify_certificate(cert, pair, fam, box, hull);
    CHECK(rep.pass);
    const double w = cert.W(0, 0), h = cert.H(0, 0);
    CHECK(w > 0.0);
    CHECK(w <= 1.0 + 1e-9);
    CHECK(w >= 0.25 - 1e-9);          // hull vertex inside the level set
    CHECK(2.0 * (w + h) < 0.0);        // closed-loop decrease
    CHECK(h * h <= 100.0 * w + 1e-9);  // input energy
}

TEST_CASE("synthesize reports suspected infeasibility for an uncontrollable pair") {
    LinearizationPair pair{Mat::identity(2), Mat(2, 1)};
    VertexFamily fam;
    fam.C_list = {Mat(2, 2)};
    fam.D_list = {Mat(2, 1)};
    BoxNeighborhood box{{1.0, 1.0}, 1.0};
    PolytopeHull hull;
    hull.vertices = {{0.1, 0.0}};
    SynthesisConfig cfg;
    cfg.restarts = 2;
    cfg.iterations = 40;
    CHECK_THROWS_AS(synthesize(pair, fam, box, hull, cfg), infeasibility_suspected);
}

TEST_CASE("certificate JSON round-trip") {
    auto cert = golden_certificate();
    auto p = make_example_plant(0.1);
    auto pair = linearize(p);
    auto fam = vertex_matrices(p, pair, bench_box());
    auto hull = hull_of_attractor(make_example_certificate(0.1, 0.5));
    auto report = verify_certificate(cert, pair, fam, bench_box(), hull);

    const std::string text = certificate_to_json(cert, &report);
    auto back = certificate_from_json(text);
    CHECK(max_abs(back.W - cert.W) <= 1e-14);
    CHECK(max_abs(back.H - cert.H) <= 1e-14);
    CHECK(max_abs(back.P - cert.P) <= 1e-10);
    CHECK(max_abs(back.K - cert.K) <= 1e-10);

    // report fields survive in the payload
    CHECK(text.find("\"pass\"") != std::string::npos);
    CHECK(text.find("\"stability\"") != std::string::npos);
}
