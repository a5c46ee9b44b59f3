// Command-line front end: controller synthesis, closed-loop simulation and
// set export with reproducible file outputs.
//
// Exit codes: 0 success, 2 infeasibility suspected, 3 config error,
// 4 simulation runtime error (arc still written).

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "hybstab/backstepping.hpp"
#include "hybstab/bench_example.hpp"
#include "hybstab/hybrid.hpp"
#include "hybstab/local_synthesis.hpp"

using nlohmann::json;
using namespace hybstab;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitInfeasible = 2;
constexpr int kExitConfig = 3;
constexpr int kExitSimError = 4;

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Vec parse_csv_doubles(const std::string& text) {
    Vec out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(tok, &pos));
            if (pos != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw config_error("cannot parse number list: '" + text + "'");
        }
    }
    if (out.empty()) throw config_error("empty number list");
    return out;
}

// Shared run parameters; JSON config values are applied first, command-line
// flags override them.
struct RunConfig {
    std::string plant = "example";
    double theta = 0.1;
    double k1 = 0.5;
    std::string out_dir = ".";
    std::uint64_t seed = 20240817;

    // synth
    std::size_t resolution = 201;
    double inflation = 0.02;
    int restarts = 60;
    int iterations = 4000;
    bool verify_only = false;
    std::string cert_path;

    // simulate
    std::string x0 = "2,0";
    std::string q0 = "2,1";
    double horizon = 15.0;
    int jump_budget = 100;
    double c_tilde = 0.75;
    double k_v = 1.6286e3;
    double a = 0.01;
    double a_prime = 0.0;  // 0: M + 0.002
    double c = 10.0;
    double max_step = 1e-2;
    int sweep = 0;
    std::string box = "-3,3";

    // export-sets
    int samples = 512;
};

const std::set<std::string> kCommonKeys = {"plant", "theta", "k1", "out-dir", "seed"};
const std::set<std::string> kSynthKeys = {"resolution", "inflation", "restarts",
                                          "iterations", "verify-only", "cert"};
const std::set<std::string> kSimulateKeys = {"x0",     "q0", "horizon",  "jump-budget",
                                             "c-tilde", "k-v", "a",       "a-prime",
                                             "c",       "max-step", "sweep", "box", "cert"};
const std::set<std::string> kExportKeys = {"samples", "cert"};

void apply_config_file(RunConfig& cfg, const std::string& path,
                       const std::set<std::string>& command_keys) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw config_error(std::string("malformed JSON config: ") + e.what());
    }
    if (!j.is_object()) throw config_error("config root must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!kCommonKeys.count(key) && !command_keys.count(key))
            throw config_error("unknown config key: '" + key + "'");
        try {
            if (key == "plant") cfg.plant = value.get<std::string>();
            else if (key == "theta") cfg.theta = value.get<double>();
            else if (key == "k1") cfg.k1 = value.get<double>();
            else if (key == "out-dir") cfg.out_dir = value.get<std::string>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "resolution") cfg.resolution = value.get<std::size_t>();
            else if (key == "inflation") cfg.inflation = value.get<double>();
            else if (key == "restarts") cfg.restarts = value.get<int>();
            else if (key == "iterations") cfg.iterations = value.get<int>();
            else if (key == "verify-only") cfg.verify_only = value.get<bool>();
            else if (key == "cert") cfg.cert_path = value.get<std::string>();
            else if (key == "x0") cfg.x0 = value.get<std::string>();
            else if (key == "q0") cfg.q0 = value.get<std::string>();
            else if (key == "horizon") cfg.horizon = value.get<double>();
            else if (key == "jump-budget") cfg.jump_budget = value.get<int>();
            else if (key == "c-tilde") cfg.c_tilde = value.get<double>();
            else if (key == "k-v") cfg.k_v = value.get<double>();
            else if (key == "a") cfg.a = value.get<double>();
            else if (key == "a-prime") cfg.a_prime = value.get<double>();
            else if (key == "c") cfg.c = value.get<double>();
            else if (key == "max-step") cfg.max_step = value.get<double>();
            else if (key == "sweep") cfg.sweep = value.get<int>();
            else if (key == "box") cfg.box = value.get<std::string>();
            else if (key == "samples") cfg.samples = value.get<int>();
        } catch (const json::exception& e) {
            throw config_error("bad value for config key '" + key + "': " + e.what());
        }
    }
}

json config_echo(const std::string& command, const RunConfig& cfg) {
    json j;
    j["plant"] = cfg.plant;
    j["theta"] = cfg.theta;
    j["k1"] = cfg.k1;
    j["out-dir"] = cfg.out_dir;
    j["seed"] = cfg.seed;
    if (command == "synth") {
        j["resolution"] = cfg.resolution;
        j["inflation"] = cfg.inflation;
        j["restarts"] = cfg.restarts;
        j["iterations"] = cfg.iterations;
        j["verify-only"] = cfg.verify_only;
        if (!cfg.cert_path.empty()) j["cert"] = cfg.cert_path;
    } else if (command == "simulate") {
        j["x0"] = cfg.x0;
        j["q0"] = cfg.q0;
        j["horizon"] = cfg.horizon;
        j["jump-budget"] = cfg.jump_budget;
        j["c-tilde"] = cfg.c_tilde;
        j["k-v"] = cfg.k_v;
        j["a"] = cfg.a;
        j["a-prime"] = cfg.a_prime;
        j["c"] = cfg.c;
        j["max-step"] = cfg.max_step;
        j["sweep"] = cfg.sweep;
        j["box"] = cfg.box;
        if (!cfg.cert_path.empty()) j["cert"] = cfg.cert_path;
    } else {
        j["samples"] = cfg.samples;
        if (!cfg.cert_path.empty()) j["cert"] = cfg.cert_path;
    }
    return j;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot write output file: " + path.string());
    out << content;
}

void write_manifest(const std::string& command, const RunConfig& cfg) {
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["seed"] = cfg.seed;
    m["config"] = config_echo(command, cfg);
    write_file(std::filesystem::path(cfg.out_dir) / (command + "_manifest.json"),
               m.dump(2) + "\n");
}

ExampleInstance make_instance(const RunConfig& cfg) {
    if (cfg.plant != "example")
        throw config_error("unknown plant '" + cfg.plant + "' (registry: example)");
    return make_example_instance(cfg.theta, cfg.k1);
}

LmiCertificate load_or_golden(const RunConfig& cfg) {
    if (cfg.cert_path.empty()) return golden_certificate();
    std::ifstream in(cfg.cert_path);
    if (!in) throw config_error("cannot open certificate file: " + cfg.cert_path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return certificate_from_json(ss.str());
    } catch (const std::exception& e) {
        throw config_error(std::string("bad certificate file: ") + e.what());
    }
}

json metrics_json(const HybridArc& arc) {
    const ArcMetrics m = arc_metrics(arc);
    json j;
    j["reason"] = to_string(arc.reason);
    if (!arc.detail.empty()) j["detail"] = arc.detail;
    j["total_jumps"] = m.total_jumps;
    if (std::isnan(m.first_switch_time))
        j["first_switch_time"] = nullptr;
    else
        j["first_switch_time"] = m.first_switch_time;
    j["final_norm"] = m.final_norm;
    j["final_time"] = m.final_time;
    json durations = json::object();
    for (const auto& [mode, dur] : m.mode_durations)
        durations[std::to_string(mode.first) + "," + std::to_string(mode.second)] = dur;
    j["mode_durations"] = durations;
    return j;
}

int run_synth(const RunConfig& cfg) {
    const ExampleInstance inst = make_instance(cfg);
    const LinearizationPair pair = linearize(inst.plant);
    const VertexFamily family =
        vertex_matrices(inst.plant, pair, {inst.mu, inst.mu_u}, cfg.resolution, cfg.inflation);
    const PolytopeHull hull = hull_of_attractor(inst.cert);
    const BoxNeighborhood box{inst.mu, inst.mu_u};

    LmiCertificate cert;
    if (cfg.verify_only) {
        cert = load_or_golden(cfg);
    } else {
        SynthesisConfig sc;
        sc.restarts = cfg.restarts;
        sc.iterations = cfg.iterations;
        sc.seed = cfg.seed;
        try {
            cert = synthesize(pair, family, box, hull, sc);
        } catch (const infeasibility_suspected& e) {
            std::cerr << "synth: " << e.what() << " (best margin " << e.best_margin << ")\n";
            write_manifest("synth", cfg);
            return kExitInfeasible;
        }
    }

    const MarginReport report = verify_certificate(cert, pair, family, box, hull);
    const std::filesystem::path dir(cfg.out_dir);
    write_file(dir / "certificate.json", certificate_to_json(cert, &report) + "\n");
    write_manifest("synth", cfg);

    std::cout << (report.pass ? "PASS" : "FAIL") << " stability_margin="
              << fmt17(report.family_margins.at("stability"))
              << " input_energy=" << fmt17(report.input_energy) << "\n";
    return report.pass ? kExitOk : kExitInfeasible;
}

SupervisorController build_loop(const RunConfig& cfg, const ExampleInstance& inst,
                                const BacksteppingController& global,
                                const LocalHybridController& local) {
    AttractorSamplingConfig sampling;
    sampling.ball_radius = inst.a;
    return build_supervisor(
        inst.plant, local, [&global](const Vec& x) { return phi_g(global, x); }, cfg.c_tilde,
        &inst.cert, sampling);
}

int run_simulate(const RunConfig& cfg) {
    const ExampleInstance inst = make_instance(cfg);
    const double a_prime = cfg.a_prime > 0.0 ? cfg.a_prime : inst.cert.M + 0.002;
    const BacksteppingController global =
        make_backstepping(inst.plant, inst.cert, cfg.k_v, cfg.a, a_prime, cfg.c);
    const LocalHybridController local = certificate_to_local_controller(load_or_golden(cfg));
    const SupervisorController sup = build_loop(cfg, inst, global, local);

    IntegratorConfig ic;
    ic.max_step = cfg.max_step;

    const std::filesystem::path dir(cfg.out_dir);

    if (cfg.sweep > 0) {
        const Vec box = parse_csv_doubles(cfg.box);
        if (box.size() != 2 || box[0] >= box[1])
            throw config_error("--box expects 'lo,hi' with lo < hi");

        // per-index seeded initial conditions; workers share nothing
        std::vector<Vec> starts(cfg.sweep);
        for (int k = 0; k < cfg.sweep; ++k) {
            std::mt19937_64 rng(cfg.seed + static_cast<std::uint64_t>(k));
            std::uniform_real_distribution<double> u(box[0], box[1]);
            starts[k] = {u(rng), u(rng)};
        }
        std::vector<std::future<HybridArc>> futures;
        for (int k = 0; k < cfg.sweep; ++k) {
            futures.push_back(std::async(std::launch::async, [&, k]() {
                const Vec& x0 = starts[k];
                const HybridMode q0 =
                    local.lyapunov(1, x0) <= cfg.c_tilde ? HybridMode{1, 1} : HybridMode{2, 1};
                return simulate(sup, x0, q0, cfg.horizon, cfg.jump_budget, ic);
            }));
        }
        json all = json::array();
        bool failed = false;
        for (int k = 0; k < cfg.sweep; ++k) {
            const HybridArc arc = futures[k].get();
            char name[32];
            std::snprintf(name, sizeof name, "arc_%03d.csv", k);
            write_file(dir / name, arc_to_csv(arc));
            json entry = metrics_json(arc);
            entry["index"] = k;
            entry["x0"] = starts[k];
            all.push_back(entry);
            failed = failed ||
                     arc.reason == StopReason::zeno || arc.reason == StopReason::stiffness;
        }
        write_file(dir / "metrics.json", all.dump(2) + "\n");
        write_manifest("simulate", cfg);
        std::cout << "sweep " << cfg.sweep << (failed ? " FAIL\n" : " ok\n");
        return failed ? kExitSimError : kExitOk;
    }

    const Vec x0 = parse_csv_doubles(cfg.x0);
    if (x0.size() != inst.plant.n) throw config_error("--x0 dimension mismatch");
    const Vec q0v = parse_csv_doubles(cfg.q0);
    if (q0v.size() != 2 || (q0v[0] != 1.0 && q0v[0] != 2.0))
        throw config_error("--q0 expects 'i,qhat' with i in {1,2}");
    const HybridMode q0{static_cast<int>(q0v[0]), static_cast<int>(q0v[1])};

    const HybridArc arc = simulate(sup, x0, q0, cfg.horizon, cfg.jump_budget, ic);
    write_file(dir / "arc.csv", arc_to_csv(arc));
    write_file(dir / "metrics.json", metrics_json(arc).dump(2) + "\n");
    write_manifest("simulate", cfg);

    std::cout << "reason=" << to_string(arc.reason) << " jumps=" << arc.jumps.size() << "\n";
    if (arc.reason == StopReason::zeno || arc.reason == StopReason::stiffness) {
        std::cerr << "simulate: " << arc.detail << "\n";
        return kExitSimError;
    }
    return kExitOk;
}

int run_export_sets(const RunConfig& cfg) {
    const ExampleInstance inst = make_instance(cfg);
    if (inst.plant.n != 2) throw config_error("export-sets requires a planar plant");
    const LmiCertificate cert = load_or_golden(cfg);
    const std::filesystem::path dir(cfg.out_dir);

    // boundary of Omega_1(x'Px): parametric ellipse through the eigensystem
    {
        const auto eig = sym_eig(cert.P);
        std::ostringstream out;
        out << "x1,x2\n";
        for (int k = 0; k <= cfg.samples; ++k) {
            const double t = 2.0 * M_PI * k / cfg.samples;
            const double r1 = std::cos(t) / std::sqrt(eig.eigenvalues[0]);
            const double r2 = std::sin(t) / std::sqrt(eig.eigenvalues[1]);
            const double x = eig.eigenvectors(0, 0) * r1 + eig.eigenvectors(0, 1) * r2;
            const double y = eig.eigenvectors(1, 0) * r1 + eig.eigenvectors(1, 1) * r2;
            out << fmt17(x) << ',' << fmt17(y) << '\n';
        }
        write_file(dir / "sets_ellipse.csv", out.str());
    }

    // V_mu box outline
    {
        std::ostringstream out;
        out << "x1,x2\n";
        const double m1 = inst.mu[0], m2 = inst.mu[1];
        const double xs[] = {m1, m1, -m1, -m1, m1};
        const double ys[] = {m2, -m2, -m2, m2, m2};
        for (int k = 0; k < 5; ++k) out << fmt17(xs[k]) << ',' << fmt17(ys[k]) << '\n';
        write_file(dir / "sets_box.csv", out.str());
    }

    // attractor curve x2 = psi1(x1), |x1| <= sqrt(2M)
    {
        std::ostringstream out;
        out << "x1,x2\n";
        const double rm = std::sqrt(2.0 * inst.cert.M);
        for (int k = 0; k <= cfg.samples; ++k) {
            const double s = -rm + 2.0 * rm * k / cfg.samples;
            out << fmt17(s) << ',' << fmt17(inst.cert.psi1({s})) << '\n';
        }
        write_file(dir / "sets_attractor.csv", out.str());
    }

    // hull vertices
    {
        const PolytopeHull hull = hull_of_attractor(inst.cert);
        std::ostringstream out;
        out << "x1,x2\n";
        for (const auto& v : hull.vertices) out << fmt17(v[0]) << ',' << fmt17(v[1]) << '\n';
        write_file(dir / "sets_hull.csv", out.str());
    }

    write_manifest("export-sets", cfg);
    std::cout << "wrote 4 set files to " << cfg.out_dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybrid stabilization toolkit"};
    app.require_subcommand(1);

    RunConfig cfg;
    std::string config_path;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (flags override)");
        sub->add_option("--plant", cfg.plant, "plant registry name");
        sub->add_option("--theta", cfg.theta, "plant parameter theta");
        sub->add_option("--k1", cfg.k1, "certificate gain K1");
        sub->add_option("--out-dir", cfg.out_dir, "output directory");
        sub->add_option("--seed", cfg.seed, "seed for randomized steps");
    };

    CLI::App* synth = app.add_subcommand("synth", "LMI synthesis / verification");
    add_common(synth);
    synth->add_option("--resolution", cfg.resolution, "grid resolution per axis");
    synth->add_option("--inflation", cfg.inflation, "interval inflation factor");
    synth->add_option("--restarts", cfg.restarts, "solver restarts");
    synth->add_option("--iterations", cfg.iterations, "solver iterations per restart");
    synth->add_flag("--verify-only", cfg.verify_only, "verify a certificate, skip synthesis");
    synth->add_option("--cert", cfg.cert_path, "certificate JSON to verify/use");

    CLI::App* sim = app.add_subcommand("simulate", "closed-loop hybrid simulation");
    add_common(sim);
    sim->add_option("--x0", cfg.x0, "initial state, comma-separated");
    sim->add_option("--q0", cfg.q0, "initial mode 'i,qhat'");
    sim->add_option("--T,--horizon", cfg.horizon, "time horizon");
    sim->add_option("--jump-budget", cfg.jump_budget, "maximum jumps");
    sim->add_option("--c-tilde", cfg.c_tilde, "hysteresis hand-back level");
    sim->add_option("--k-v", cfg.k_v, "backstepping gain K_V");
    sim->add_option("--a", cfg.a, "practical radius a");
    sim->add_option("--a-prime", cfg.a_prime, "sublevel threshold (0: M + 0.002)");
    sim->add_option("--c", cfg.c, "backstepping damping gain c");
    sim->add_option("--max-step", cfg.max_step, "integrator maximum step");
    sim->add_option("--sweep", cfg.sweep, "number of random-start simulations");
    sim->add_option("--box", cfg.box, "sweep sampling box 'lo,hi'");
    sim->add_option("--cert", cfg.cert_path, "local certificate JSON");

    CLI::App* exp = app.add_subcommand("export-sets", "export set boundaries as CSV");
    add_common(exp);
    exp->add_option("--samples", cfg.samples, "polyline sample count");
    exp->add_option("--cert", cfg.cert_path, "certificate JSON for the ellipse");

    // two-phase parse: first pass finds --config, whose values become the
    // defaults for the second, authoritative pass
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    const std::string command =
        synth->parsed() ? "synth" : sim->parsed() ? "simulate" : "export-sets";

    try {
        if (!config_path.empty()) {
            const auto& keys = command == "synth"     ? kSynthKeys
                               : command == "simulate" ? kSimulateKeys
                                                       : kExportKeys;
            RunConfig from_file;
            apply_config_file(from_file, config_path, keys);
            cfg = from_file;
            // re-parse so explicitly passed flags override the file values
            app.clear();
            try {
                app.parse(argc, argv);
            } catch (const CLI::ParseError&) {
                return kExitConfig;
            }
        }

        std::filesystem::create_directories(cfg.out_dir);
        if (command == "synth") return run_synth(cfg);
        if (command == "simulate") return run_simulate(cfg);
        return run_export_sets(cfg);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const supervisor_construction_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitSimError;
    }
}
