// pybind11 bindings for the main toolkit operations, specialized to the
// registry plant family (scalar-x1 benchmark).

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hybstab/backstepping.hpp"
#include "hybstab/bench_example.hpp"
#include "hybstab/hybrid.hpp"
#include "hybstab/local_synthesis.hpp"

namespace py = pybind11;
using namespace hybstab;

namespace {

std::vector<std::vector<double>> mat_to_list(const Mat& m) {
    std::vector<std::vector<double>> out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out[i].push_back(m(i, j));
    return out;
}

struct PyLoop {
    ExampleInstance inst;
    BacksteppingController global;
    LocalHybridController local;
    SupervisorController sup;

    PyLoop(double theta, double k1, double c_tilde)
        : inst(make_example_instance(theta, k1)),
          global(make_backstepping(inst.plant, inst.cert, inst.K_V, inst.a,
                                   inst.cert.M + 0.002, inst.c)),
          local(certificate_to_local_controller(golden_certificate())) {
        AttractorSamplingConfig sampling;
        sampling.ball_radius = inst.a;
        sup = build_supervisor(
            inst.plant, local, [this](const Vec& x) { return phi_g(global, x); }, c_tilde,
            &inst.cert, sampling);
    }
};

py::dict arc_to_dict(const HybridArc& arc) {
    const ArcMetrics m = arc_metrics(arc);
    py::dict d;
    d["reason"] = to_string(arc.reason);
    d["total_jumps"] = m.total_jumps;
    d["first_switch_time"] =
        std::isnan(m.first_switch_time) ? py::object(py::none()) : py::cast(m.first_switch_time);
    d["final_norm"] = m.final_norm;
    d["final_time"] = m.final_time;
    d["csv"] = arc_to_csv(arc);
    return d;
}

}  // namespace

PYBIND11_MODULE(_hybstab, m) {
    m.doc() = "hybrid stabilization toolkit bindings";

    m.def(
        "derived_constants",
        [](double theta, double k1) {
            const DerivedConstants d = derived_constants(theta, k1);
            return py::make_tuple(d.eps_max, d.M_min);
        },
        py::arg("theta"), py::arg("k1"), "returns (eps_max, M_min)");

    m.def(
        "k1_window",
        [](double theta, const Vec& mu) {
            const K1Window w = k1_window(theta, mu);
            return py::make_tuple(w.lower, w.upper);
        },
        py::arg("theta"), py::arg("mu"));

    m.def("golden_certificate", [] {
        const LmiCertificate cert = golden_certificate();
        py::dict d;
        d["W"] = mat_to_list(cert.W);
        d["H"] = mat_to_list(cert.H);
        d["P"] = mat_to_list(cert.P);
        d["K"] = mat_to_list(cert.K);
        return d;
    });

    m.def(
        "verify_golden",
        [](double theta, double k1) {
            const ExampleInstance inst = make_example_instance(theta, k1);
            const LinearizationPair pair = linearize(inst.plant);
            const VertexFamily family =
                vertex_matrices(inst.plant, pair, {inst.mu, inst.mu_u});
            const PolytopeHull hull = hull_of_attractor(inst.cert);
            const MarginReport rep = verify_certificate(
                golden_certificate(), pair, family, {inst.mu, inst.mu_u}, hull);
            py::dict d;
            d["pass"] = rep.pass;
            d["family_margins"] = rep.family_margins;
            d["hull_vertex_levels"] = rep.hull_vertex_levels;
            d["input_energy"] = rep.input_energy;
            d["box_diagonal"] = rep.box_diagonal;
            return d;
        },
        py::arg("theta") = 0.1, py::arg("k1") = 0.5);

    m.def(
        "phi_g",
        [](const Vec& x, double theta, double k1) {
            static thread_local std::unique_ptr<PyLoop> loop;
            if (!loop || loop->inst.theta != theta || loop->inst.K1 != k1)
                loop = std::make_unique<PyLoop>(theta, k1, 0.75);
            return phi_g(loop->global, x);
        },
        py::arg("x"), py::arg("theta") = 0.1, py::arg("k1") = 0.5,
        "global practical stabilizer at x");

    m.def(
        "simulate",
        [](const Vec& x0, std::pair<int, int> q0, double horizon, double c_tilde,
           double max_step, int jump_budget) {
            PyLoop loop(0.1, 0.5, c_tilde);
            IntegratorConfig cfg;
            cfg.max_step = max_step;
            const HybridArc arc = simulate(loop.sup, x0, {q0.first, q0.second}, horizon,
                                           jump_budget, cfg);
            return arc_to_dict(arc);
        },
        py::arg("x0"), py::arg("q0") = std::make_pair(2, 1), py::arg("horizon") = 15.0,
        py::arg("c_tilde") = 0.75, py::arg("max_step") = 1e-2, py::arg("jump_budget") = 100,
        "simulate the supervised benchmark loop; returns metrics and the arc CSV");
}
