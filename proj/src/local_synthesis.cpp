#include "hybstab/local_synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

namespace hybstab {

namespace {

// Gaussian elimination with partial pivoting; used only for tiny systems
// (heuristic initial guesses), never on the verification path.
Vec solve_dense(Mat a, Vec b) {
    const std::size_t n = a.rows;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        if (a(piv, k) == 0.0) throw numerics_error("solve_dense: singular system");
        if (piv != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
            std::swap(b[k], b[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double m = a(i, k) / a(k, k);
            for (std::size_t j = k; j < n; ++j) a(i, j) -= m * a(k, j);
            b[i] -= m * b[k];
        }
    }
    Vec x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= a(ii, j) * x[j];
        x[ii] = s / a(ii, ii);
    }
    return x;
}

Mat spd_project(const Mat& w, double floor_ev = 1e-6) {
    const auto eig = sym_eig(symmetrize(w));
    const std::size_t n = w.rows;
    Mat out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double lam = std::max(eig.eigenvalues[k], floor_ev);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                out(i, j) += lam * eig.eigenvectors(i, k) * eig.eigenvectors(j, k);
    }
    return symmetrize(out);
}

}  // namespace

LinearizationPair linearize(const ControlAffinePlant& plant) {
    const Vec origin(plant.n, 0.0);
    LinearizationPair pair;
    pair.F = eval_dfh_dx(plant, origin, 0.0);
    pair.G = Mat::col(eval_dfh_du(plant, origin, 0.0));
    for (double v : pair.F.a)
        if (!std::isfinite(v)) throw numerics_error("linearize: non-finite derivative");
    for (double v : pair.G.a)
        if (!std::isfinite(v)) throw numerics_error("linearize: non-finite derivative");
    return pair;
}

VertexFamily vertex_matrices(const ControlAffinePlant& plant, const LinearizationPair& pair,
                             const BoxNeighborhood& box, std::size_t resolution,
                             double inflation, std::size_t max_blocks) {
    const std::size_t n = plant.n;
    if (box.mu.size() != n) throw dimension_error("vertex_matrices: mu dimension mismatch");

    VertexFamily fam;
    fam.C_intervals.assign(n, std::vector<EntryInterval>(n));
    fam.D_intervals.assign(n, EntryInterval{});
    const double inf = std::numeric_limits<double>::infinity();
    for (auto& row : fam.C_intervals)
        for (auto& e : row) e = {inf, -inf};
    for (auto& e : fam.D_intervals) e = {inf, -inf};

    // one sweep over the (x, u) tensor grid, tracking every gradient entry
    std::vector<std::size_t> idx(n + 1, 0);
    Vec x(n);
    for (;;) {
        for (std::size_t k = 0; k < n; ++k)
            x[k] = -box.mu[k] + 2.0 * box.mu[k] * idx[k] / (resolution - 1);
        const double u = -box.mu_u + 2.0 * box.mu_u * idx[n] / (resolution - 1);

        const Mat jx = eval_dfh_dx(plant, x, u);
        const Vec ju = eval_dfh_du(plant, x, u);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                const double v = jx(i, j) - pair.F(i, j);
                fam.C_intervals[i][j].lo = std::min(fam.C_intervals[i][j].lo, v);
                fam.C_intervals[i][j].hi = std::max(fam.C_intervals[i][j].hi, v);
            }
            const double v = ju[i] - pair.G(i, 0);
            fam.D_intervals[i].lo = std::min(fam.D_intervals[i].lo, v);
            fam.D_intervals[i].hi = std::max(fam.D_intervals[i].hi, v);
        }

        std::size_t k = 0;
        while (k <= n && ++idx[k] == resolution) idx[k++] = 0;
        if (k == n + 1) break;
    }

    // enumerate sign combinations of the non-degenerate entries (inflated)
    std::vector<std::pair<std::size_t, std::size_t>> c_branch;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (!fam.C_intervals[i][j].degenerate()) c_branch.emplace_back(i, j);
    std::vector<std::size_t> d_branch;
    for (std::size_t i = 0; i < n; ++i)
        if (!fam.D_intervals[i].degenerate()) d_branch.push_back(i);

    const std::size_t nc = std::size_t{1} << c_branch.size();
    const std::size_t nd = std::size_t{1} << d_branch.size();
    if (nc * nd > max_blocks)
        throw numerics_error("vertex_matrices: vertex family exceeds the block cap");

    auto inflated = [&](const EntryInterval& e) {
        const Extrema w = inflate_extrema({e.lo, e.hi}, inflation);
        return EntryInterval{w.min, w.max};
    };

    for (std::size_t mask = 0; mask < nc; ++mask) {
        Mat c(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) c(i, j) = fam.C_intervals[i][j].lo;
        for (std::size_t b = 0; b < c_branch.size(); ++b) {
            const auto [i, j] = c_branch[b];
            const EntryInterval e = inflated(fam.C_intervals[i][j]);
            c(i, j) = (mask >> b) & 1 ? e.hi : e.lo;
        }
        fam.C_list.push_back(c);
    }
    for (std::size_t mask = 0; mask < nd; ++mask) {
        Mat d(n, 1);
        for (std::size_t i = 0; i < n; ++i) d(i, 0) = fam.D_intervals[i].lo;
        for (std::size_t b = 0; b < d_branch.size(); ++b) {
            const std::size_t i = d_branch[b];
            const EntryInterval e = inflated(fam.D_intervals[i]);
            d(i, 0) = (mask >> b) & 1 ? e.hi : e.lo;
        }
        fam.D_list.push_back(d);
    }
    return fam;
}

PolytopeHull hull_of_attractor(const BoundsCertificate& cert) {
    if (cert.x1_dim != 1)
        throw structural_error("hull_of_attractor: supply vertices directly for x1 dim > 1");
    const double r = sublevel_radius(cert, cert.M);

    // radius of {V1 <= M} along x1 (exact sqrt(2M) for the quadratic form)
    double lo = 0.0, hi = r;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (cert.V1(Vec{mid}) <= cert.M ? lo : hi) = mid;
    }
    const double rm = lo;

    // extrema of d psi1 over the exact sublevel interval, endpoints included
    double ap = -std::numeric_limits<double>::infinity();
    double am = std::numeric_limits<double>::infinity();
    const int grid = 2000;
    for (int k = 0; k <= grid; ++k) {
        const double s = -rm + 2.0 * rm * k / grid;
        const double g = eval_grad_psi1(cert, Vec{s})[0];
        ap = std::max(ap, g);
        am = std::min(am, g);
    }

    PolytopeHull hull;
    hull.a_plus = ap;
    hull.a_minus = am;
    hull.vertices = {{rm, ap * rm}, {rm, am * rm}, {-rm, -ap * rm}, {-rm, -am * rm}};
    if (std::abs(ap - am) < 1e-12)
        hull.vertices = {{rm, ap * rm}, {-rm, -ap * rm}};  // segment
    return hull;
}

bool hull_contains(const PolytopeHull& hull, const Vec& x, double tol) {
    if (x.size() != 2) throw structural_error("hull_contains: planar hulls only");
    // order vertices by angle around the centroid and run edge sign tests
    double cx = 0.0, cy = 0.0;
    for (const auto& v : hull.vertices) {
        cx += v[0];
        cy += v[1];
    }
    cx /= hull.vertices.size();
    cy /= hull.vertices.size();
    auto verts = hull.vertices;
    std::sort(verts.begin(), verts.end(), [&](const Vec& a, const Vec& b) {
        return std::atan2(a[1] - cy, a[0] - cx) < std::atan2(b[1] - cy, b[0] - cx);
    });
    for (std::size_t k = 0; k < verts.size(); ++k) {
        const Vec& p = verts[k];
        const Vec& q = verts[(k + 1) % verts.size()];
        const double cross = (q[0] - p[0]) * (x[1] - p[1]) - (q[1] - p[1]) * (x[0] - p[0]);
        if (cross < -tol) return false;
    }
    return true;
}

std::vector<LmiBlock> assemble_lmis(const LinearizationPair& pair, const VertexFamily& family,
                                    const BoxNeighborhood& box, const PolytopeHull& hull,
                                    const Mat& W, const Mat& H) {
    const std::size_t n = pair.F.rows;
    if (W.rows != n || H.rows != n) throw dimension_error("assemble_lmis: dimension mismatch");
    std::vector<LmiBlock> blocks;

    for (const Mat& c : family.C_list) {
        const Mat a = pair.F + c;
        for (const Mat& d : family.D_list) {
            const Mat g = pair.G + d;
            Mat b = W * transpose(a) + H * transpose(g) + a * W + g * transpose(H);
            blocks.push_back({"stability", symmetrize(b), true});
        }
    }

    for (std::size_t s = 0; s < n; ++s) {
        Mat b(n + 1, n + 1);
        const double mu2 = box.mu[s] * box.mu[s];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) b(i, j) = mu2 * W(i, j);
        for (std::size_t i = 0; i < n; ++i) {
            b(i, n) = W(i, s);
            b(n, i) = W(i, s);
        }
        b(n, n) = 1.0;
        blocks.push_back({"box", b, false});
    }

    for (const Vec& xp : hull.vertices) {
        Mat b(n + 1, n + 1);
        b(0, 0) = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            b(0, i + 1) = xp[i];
            b(i + 1, 0) = xp[i];
            for (std::size_t j = 0; j < n; ++j) b(i + 1, j + 1) = W(i, j);
        }
        blocks.push_back({"hull", b, false});
    }

    {
        Mat b(n + 1, n + 1);
        const double mu2 = box.mu_u * box.mu_u;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) b(i, j) = mu2 * W(i, j);
        for (std::size_t i = 0; i < n; ++i) {
            b(i, n) = H(i, 0);
            b(n, i) = H(i, 0);
        }
        b(n, n) = 1.0;
        blocks.push_back({"input", b, false});
    }
    return blocks;
}

LmiCertificate make_certificate(const Mat& W, const Mat& H) {
    LmiCertificate cert;
    cert.W = symmetrize(W);
    cert.H = H;
    cert.P = solve_spd(cert.W, Mat::identity(W.rows));
    cert.P = symmetrize(cert.P);
    cert.K = transpose(cert.P * cert.H);
    cert.c_level = 1.0;
    return cert;
}

MarginReport verify_certificate(const LmiCertificate& cert, const LinearizationPair& pair,
                                const VertexFamily& family, const BoxNeighborhood& box,
                                const PolytopeHull& hull, double psd_slack) {
    MarginReport report;
    const auto blocks = assemble_lmis(pair, family, box, hull, cert.W, cert.H);
    for (const auto& blk : blocks) {
        const auto eig = sym_eig(blk.block);
        const double margin =
            blk.strict_negative ? -eig.eigenvalues.back() : eig.eigenvalues.front();
        auto it = report.family_margins.find(blk.family);
        if (it == report.family_margins.end())
            report.family_margins[blk.family] = margin;
        else
            it->second = std::min(it->second, margin);
    }

    for (const Vec& xp : hull.vertices) {
        const Mat xv = Mat::col(xp);
        report.hull_vertex_levels.push_back((transpose(xv) * cert.P * xv)(0, 0));
    }
    report.input_energy = (cert.K * cert.W * transpose(cert.K))(0, 0);
    for (std::size_t s = 0; s < cert.W.rows; ++s) report.box_diagonal.push_back(cert.W(s, s));

    bool pass = is_pd(cert.W, 0.0).positive_definite;
    for (const auto& [name, margin] : report.family_margins)
        pass = pass && (name == "stability" ? margin > 0.0 : margin >= -psd_slack);
    report.pass = pass;
    return report;
}

namespace {

// parameter packing for the subgradient solver: upper triangle of W, then H
struct ParamMap {
    std::size_t n;
    std::size_t size() const { return n * (n + 1) / 2 + n; }
    void unpack(const Vec& th, Mat& W, Mat& H) const {
        W = Mat(n, n);
        H = Mat(n, 1);
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                W(i, j) = th[k];
                W(j, i) = th[k];
                ++k;
            }
        for (std::size_t i = 0; i < n; ++i) H(i, 0) = th[k++];
    }
    Vec pack(const Mat& W, const Mat& H) const {
        Vec th(size());
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) th[k++] = W(i, j);
        for (std::size_t i = 0; i < n; ++i) th[k++] = H(i, 0);
        return th;
    }
};

struct Violation {
    double value = -std::numeric_limits<double>::infinity();
    std::size_t block_index = 0;
    Vec eigvec;
    bool negate = false;  // true when the active eigenvalue is lambda_min
};

Violation worst_violation(const std::vector<LmiBlock>& blocks, double target_margin) {
    Violation worst;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto eig = sym_eig(blocks[b].block);
        double v;
        Vec vec(blocks[b].block.rows);
        bool neg;
        if (blocks[b].strict_negative) {
            v = eig.eigenvalues.back() + target_margin;
            for (std::size_t i = 0; i < vec.size(); ++i)
                vec[i] = eig.eigenvectors(i, vec.size() - 1);
            neg = false;
        } else {
            v = -eig.eigenvalues.front() + 1e-8;
            for (std::size_t i = 0; i < vec.size(); ++i) vec[i] = eig.eigenvectors(i, 0);
            neg = true;
        }
        if (v > worst.value) worst = {v, b, vec, neg};
    }
    return worst;
}

// stabilizing gain for the nominal pair by pole placement (planar case only)
bool nominal_gain(const LinearizationPair& pair, Mat& K_out) {
    if (pair.F.rows != 2) return false;
    const Mat& F = pair.F;
    const Mat& G = pair.G;
    // trace(F+GK) = -p1 and det(F+GK) = det F + K adj(F) G = p0, both linear in K
    const double p1 = 5.0, p0 = 6.0;  // poles -2, -3
    Mat adjF(2, 2, {F(1, 1), -F(0, 1), -F(1, 0), F(0, 0)});
    Mat a(2, 2);
    a(0, 0) = G(0, 0);
    a(0, 1) = G(1, 0);
    const Mat ag = adjF * G;  // det(F + G K^T-ish) expansion: K * adj(F) * G
    a(1, 0) = ag(0, 0);
    a(1, 1) = ag(1, 0);
    const double detF = F(0, 0) * F(1, 1) - F(0, 1) * F(1, 0);
    try {
        const Vec k = solve_dense(a, {-p1 - F(0, 0) - F(1, 1), p0 - detF});
        K_out = Mat(1, 2, {k[0], k[1]});
        return std::isfinite(k[0]) && std::isfinite(k[1]);
    } catch (const numerics_error&) {
        return false;
    }
}

// Lyapunov solve A X + X A' = -I for n = 2 via the 3x3 symmetric system
bool lyapunov2(const Mat& A, Mat& X_out) {
    if (A.rows != 2) return false;
    // unknowns x11, x12, x22
    Mat m(3, 3);
    m(0, 0) = 2 * A(0, 0);
    m(0, 1) = 2 * A(0, 1);
    m(0, 2) = 0;
    m(1, 0) = A(1, 0);
    m(1, 1) = A(0, 0) + A(1, 1);
    m(1, 2) = A(0, 1);
    m(2, 0) = 0;
    m(2, 1) = 2 * A(1, 0);
    m(2, 2) = 2 * A(1, 1);
    try {
        const Vec x = solve_dense(m, {-1.0, 0.0, -1.0});
        X_out = Mat(2, 2, {x[0], x[1], x[1], x[2]});
        return true;
    } catch (const numerics_error&) {
        return false;
    }
}

}  // namespace

LmiCertificate synthesize(const LinearizationPair& pair, const VertexFamily& family,
                          const BoxNeighborhood& box, const PolytopeHull& hull,
                          const SynthesisConfig& config) {
    const std::size_t n = pair.F.rows;
    const ParamMap pm{n};
    std::mt19937_64 rng(config.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);

    double best_margin = -std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < config.restarts; ++restart) {
        Mat W, H;
        if (restart == 0) {
            // deterministic pole-placement seed when available
            Mat K0;
            bool ok = nominal_gain(pair, K0);
            if (ok) {
                const Mat Acl = pair.F + pair.G * K0;
                ok = lyapunov2(Acl, W);
                if (ok && !is_pd(W, 0.0).positive_definite) ok = false;
            }
            if (ok) {
                // scale so the hull vertices sit inside the level set
                double worst = 0.0;
                const Mat P0 = solve_spd(W, Mat::identity(n));
                for (const Vec& xp : hull.vertices) {
                    const Mat xv = Mat::col(xp);
                    worst = std::max(worst, (transpose(xv) * P0 * xv)(0, 0));
                }
                if (worst > 0.0) W = (worst / 0.8) * W;
                H = W * transpose(K0);
            } else {
                W = Mat::identity(n);
                H = Mat(n, 1);
            }
        } else {
            Mat A(n, n);
            for (double& v : A.a) v = unit(rng);
            W = spd_project(A * transpose(A) + Mat::identity(n), 0.1);
            Mat K0(1, n);
            for (double& v : K0.a) v = -10.0 + 8.0 * unit(rng);
            H = W * transpose(K0);
        }

        Vec th = pm.pack(W, H);
        for (int it = 0; it < config.iterations; ++it) {
            pm.unpack(th, W, H);
            W = spd_project(W);
            th = pm.pack(W, H);

            const auto blocks = assemble_lmis(pair, family, box, hull, W, H);
            const Violation v = worst_violation(blocks, config.target_margin);
            best_margin = std::max(best_margin, -v.value);
            if (v.value <= 0.0) {
                LmiCertificate cert = make_certificate(W, H);
                const auto rep = verify_certificate(cert, pair, family, box, hull);
                if (rep.pass) return cert;
            }

            // exact subgradient of the active extreme eigenvalue: blocks are
            // affine in the parameters, so a unit-parameter difference gives
            // the directional derivative
            Vec grad(pm.size(), 0.0);
            const LmiBlock base = blocks[v.block_index];
            for (std::size_t k = 0; k < pm.size(); ++k) {
                Vec thp = th;
                thp[k] += 1.0;
                Mat Wp, Hp;
                pm.unpack(thp, Wp, Hp);
                const auto bp = assemble_lmis(pair, family, box, hull, Wp, Hp);
                const Mat diff = bp[v.block_index].block - base.block;
                double d = 0.0;
                for (std::size_t i = 0; i < diff.rows; ++i)
                    for (std::size_t j = 0; j < diff.cols; ++j)
                        d += v.eigvec[i] * diff(i, j) * v.eigvec[j];
                grad[k] = v.negate ? -d : d;
            }
            double gn = 0.0;
            for (double g : grad) gn += g * g;
            gn = std::sqrt(gn);
            if (gn < 1e-14) break;
            const double step = 0.5 / (1.0 + it / 40.0);
            for (std::size_t k = 0; k < pm.size(); ++k) th[k] -= step * grad[k] / gn;
        }
    }
    throw infeasibility_suspected("synthesize: restart budget exhausted", best_margin);
}

std::string certificate_to_json(const LmiCertificate& cert, const MarginReport* report) {
    nlohmann::json j;
    std::vector<std::vector<double>> w(cert.W.rows);
    for (std::size_t i = 0; i < cert.W.rows; ++i)
        for (std::size_t k = 0; k < cert.W.cols; ++k) w[i].push_back(cert.W(i, k));
    j["W"] = w;
    std::vector<double> h;
    for (std::size_t i = 0; i < cert.H.rows; ++i) h.push_back(cert.H(i, 0));
    j["H"] = h;
    if (report) {
        nlohmann::json m;
        for (const auto& [name, margin] : report->family_margins) m[name] = margin;
        m["hull_vertex_levels"] = report->hull_vertex_levels;
        m["input_energy"] = report->input_energy;
        m["box_diagonal"] = report->box_diagonal;
        m["pass"] = report->pass;
        j["margins"] = m;
    }
    return j.dump(2);
}

LmiCertificate certificate_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    const auto& wj = j.at("W");
    const std::size_t n = wj.size();
    Mat W(n, n), H(n, 1);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) W(i, k) = wj.at(i).at(k).get<double>();
    const auto& hj = j.at("H");
    for (std::size_t i = 0; i < n; ++i) H(i, 0) = hj.at(i).get<double>();
    return make_certificate(W, H);
}

}  // namespace hybstab
