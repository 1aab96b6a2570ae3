// Acceptance gate: one PASS/FAIL line per criterion, exit code = number
// of failures. Seeds and tolerances are pinned here on purpose.

#include "clusterloc/engine.hpp"
#include "clusterloc/graph.hpp"
#include "clusterloc/harness.hpp"
#include "clusterloc/model.hpp"
#include "clusterloc/scenario_io.hpp"
#include "clusterloc/subsolver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>
#include <string>
#include <vector>

using namespace clusterloc;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("criterion %2d: %s  %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
    if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

constexpr std::uint64_t kBaseSeed = 1000;

// ---------------------------------------------------------------------
// criterion 1: incidence matrix of the 4-cluster graph, edges
// {1-2, 2-3, 1-3, 2-4}, equals the expected matrix up to row permutation
void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    const ClusterGraph g(4, {{1, 2}, {2, 3}, {1, 3}, {2, 4}});
    const auto inc = incidence_matrix(g, 1);
    const std::vector<std::vector<double>> expected{
        {1, -1, 0, 0}, {0, 1, -1, 0}, {1, 0, -1, 0}, {0, 1, 0, -1}};
    std::vector<bool> used(4, false);
    bool ok = inc.C.rows() == 4 && inc.C.cols() == 4;
    for (const auto& row : expected) {
        bool matched = false;
        for (int r = 0; ok && r < 4 && !matched; ++r) {
            if (used[static_cast<std::size_t>(r)]) continue;
            bool same = true;
            for (int c = 0; c < 4; ++c) same = same && inc.C(r, c) == row[static_cast<std::size_t>(c)];
            if (same) {
                matched = true;
                used[static_cast<std::size_t>(r)] = true;
            }
        }
        ok = ok && matched;
    }
    const double dt = seconds_since(t0);
    ok = ok && dt < 1e-3;
    report(1, ok, "incidence vs expected matrix, " + std::to_string(dt * 1e3) + " ms");
}

// ---------------------------------------------------------------------
// criterion 2: barrier vs projected-gradient oracle on random instances.
// The oracle minimizes the reduced objective phi(x, y) obtained by the
// exact inner minimization d_k = sqrt(eps_k) (valid because the cost is
// decreasing in d_k on the feasible interval), projected onto y >= |x|^2.

double pg_reduced_objective(const SubproblemSpec& sp, const Vec& x, double y) {
    double f = 0.0;
    for (int k = 0; k < sp.n(); ++k) {
        const Vec& a = sp.anchors_pos[static_cast<std::size_t>(k)];
        const double eps = y - 2.0 * x.dot(a) + a.squaredNorm();
        const double d = std::sqrt(std::max(0.0, eps));
        f += sp.weight[k] * (eps - 2.0 * d * sp.r[k] + sp.r[k] * sp.r[k]);
    }
    f += sp.g.dot(x);
    for (const auto& q : sp.quad) f += 0.5 * q.weight * (x - q.target).squaredNorm();
    return f;
}

void pg_reduced_gradient(const SubproblemSpec& sp, const Vec& x, double y, Vec& gx, double& gy) {
    gx = Vec::Zero(x.size());
    gy = 0.0;
    for (int k = 0; k < sp.n(); ++k) {
        const Vec& a = sp.anchors_pos[static_cast<std::size_t>(k)];
        const double eps = std::max(1e-300, y - 2.0 * x.dot(a) + a.squaredNorm());
        const double de = sp.weight[k] * (1.0 - sp.r[k] / std::sqrt(eps));
        gx += de * (-2.0 * a);
        gy += de;
    }
    gx += sp.g;
    for (const auto& q : sp.quad) gx += q.weight * (x - q.target);
}

// Euclidean projection of (p, q) onto the epigraph {(x, y): y >= |x|^2}:
// x = p / (1 + 2t), y = q + t with t >= 0 the root of
// |p|^2 / (1 + 2t)^2 = q + t, found by bisection.
void pg_project(Vec& p, double& q) {
    if (q >= p.squaredNorm()) return;
    const double pn2 = p.squaredNorm();
    auto h = [&](double t) { return pn2 / ((1 + 2 * t) * (1 + 2 * t)) - (q + t); };
    double lo = 0.0, hi = 1.0;
    while (h(hi) > 0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (h(mid) > 0 ? lo : hi) = mid;
    }
    const double t = 0.5 * (lo + hi);
    p /= (1.0 + 2.0 * t);
    q += t;
}

double pg_solve(const SubproblemSpec& sp, int max_it = 200000) {
    Vec x = Vec::Zero(sp.dim());
    for (const auto& a : sp.anchors_pos) x += a;
    x /= sp.n();
    double y = x.squaredNorm() + 1.0;
    double f = pg_reduced_objective(sp, x, y);
    double step = 1.0;
    Vec gx;
    double gy;
    for (int it = 0; it < max_it; ++it) {
        pg_reduced_gradient(sp, x, y, gx, gy);
        bool moved = false;
        for (int bt = 0; bt < 60; ++bt) {
            Vec xn = x - step * gx;
            double yn = y - step * gy;
            pg_project(xn, yn);
            const double fn = pg_reduced_objective(sp, xn, yn);
            const double model = gx.dot(x - xn) + gy * (y - yn) -
                                 0.5 / step * ((x - xn).squaredNorm() + (y - yn) * (y - yn));
            if (fn <= f - std::max(0.0, model) + 1e-14 * std::abs(f)) {
                if (fn < f - 1e-15 * (1.0 + std::abs(f))) moved = true;
                x = xn;
                y = yn;
                f = fn;
                break;
            }
            step *= 0.5;
        }
        step *= 1.3;
        if (!moved && it > 100) break;
    }
    return f;
}

void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        const int N = 2 + static_cast<int>(U(rng) * 3);  // 2..4 sensors
        SubproblemSpec sp;
        Vec ev(2);
        ev << 10.0 * U(rng) - 5.0, 10.0 * U(rng) - 5.0;
        sp.r = Vec(N);
        sp.weight = Vec(N);
        for (int k = 0; k < N; ++k) {
            Vec a(2);
            a << 10.0 * U(rng) - 5.0, 10.0 * U(rng) - 5.0;
            sp.anchors_pos.push_back(a);
            const double sigma = 0.3 + 0.7 * U(rng);
            sp.weight[k] = floored_weight(sigma);
            sp.r[k] = std::max(0.05, (ev - a).norm() + sigma * (2.0 * U(rng) - 1.0));
        }
        sp.g = Vec(2);
        sp.g << 0.2 * (2.0 * U(rng) - 1.0), 0.2 * (2.0 * U(rng) - 1.0);
        const int nanchor = static_cast<int>(U(rng) * 3);
        for (int q = 0; q < nanchor; ++q) {
            Vec z(2);
            z << ev[0] + 2.0 * (2.0 * U(rng) - 1.0), ev[1] + 2.0 * (2.0 * U(rng) - 1.0);
            sp.quad.push_back({0.1 + U(rng), z});
        }
        const LocalState sol = solve_subproblem(sp, BarrierSettings{});
        const double fb = spec_cost(sp, sol) + sp.g.dot(sol.x) + [&] {
            double q = 0.0;
            for (const auto& qa : sp.quad) q += 0.5 * qa.weight * (sol.x - qa.target).squaredNorm();
            return q;
        }();
        const double fpg = pg_solve(sp);
        worst = std::max(worst, std::abs(fb - fpg) / std::max(1e-10, std::abs(fpg)));
    }
    const double dt = seconds_since(t0);
    const bool ok = worst <= 1e-4 && dt < 60.0;
    report(2, ok,
           "worst relative objective gap " + std::to_string(worst) + ", " + std::to_string(dt) + " s");
}

// ---------------------------------------------------------------------
// criterion 3: zero-noise recovery within 1e-3 for all four variants,
// L = 10 trials. GS and J use rho = 1e-4 so the consensus transient has
// settled within the iteration budget.
void criterion_3() {
    const auto t0 = std::chrono::steady_clock::now();
    const Problem prob = reference_problem(0.0);
    double worst = 0.0;
    std::string per;
    for (Variant var : {Variant::SCL, Variant::TCL, Variant::GS, Variant::J}) {
        RunConfig cfg;
        cfg.variant = var;
        cfg.rho = 1e-4;
        cfg.iterations = (var == Variant::SCL || var == Variant::TCL) ? 1 : 50;
        double w = 0.0;
        for (int l = 1; l <= 10; ++l) {
            const auto meas = generate_measurements(prob.scenario, kBaseSeed + static_cast<std::uint64_t>(l));
            const auto rec = run(prob.scenario, prob.graph, meas, cfg);
            for (const auto& st : rec.iterations.back().states)
                w = std::max(w, (st.x - prob.scenario.event_position).norm());
        }
        per += to_string(var) + "=" + std::to_string(w) + " ";
        worst = std::max(worst, w);
    }
    const double dt = seconds_since(t0);
    const bool ok = worst <= 1e-3 && dt < 60.0;
    report(3, ok, "worst recovery error: " + per + "(" + std::to_string(dt) + " s)");
}

// ---------------------------------------------------------------------
// criteria 4-6 share their Monte Carlo batches
struct Batch {
    MetricsReport rep;
    double max_err = 0.0;
};

Batch run_batch(const Scenario& s, const ClusterGraph& g, Variant var, double rho, int T, int L) {
    RunConfig cfg;
    cfg.variant = var;
    cfg.rho = rho;
    cfg.iterations = (var == Variant::SCL || var == Variant::TCL) ? 1 : T;
    Batch b;
    b.rep = monte_carlo(s, g, cfg, L, kBaseSeed);
    for (double e : b.rep.err_rmse) b.max_err = std::max(b.max_err, e);
    return b;
}

void criteria_4_5_6() {
    const Problem prob = reference_problem();
    const int T = 50, L = 50;

    // criterion 4: rho U-shape at sigma = 0.05 (per-cluster, GS and J)
    {
        const Scenario s = with_sigma(prob.scenario, 0.05);
        bool ok = true;
        std::string detail;
        for (Variant var : {Variant::GS, Variant::J}) {
            const auto lo = run_batch(s, prob.graph, var, 1e-5, T, L);
            const auto mid = run_batch(s, prob.graph, var, 1e-3, T, L);
            const auto hi = run_batch(s, prob.graph, var, 1e-1, T, L);
            for (std::size_t i = 0; i < mid.rep.err_rmse.size(); ++i)
                ok = ok && mid.rep.err_rmse[i] < lo.rep.err_rmse[i] &&
                     mid.rep.err_rmse[i] < hi.rep.err_rmse[i];
            detail += to_string(var) + " err(1e-5/1e-3/1e-1)=" + std::to_string(lo.max_err) + "/" +
                      std::to_string(mid.max_err) + "/" + std::to_string(hi.max_err) + " ";
        }
        report(4, ok, detail);
    }

    // criteria 5 and 6 over sigma in {0.02, 0.05, 0.10} at rho = 1e-3
    bool ok5 = true, ok6 = true;
    std::string d5, d6;
    for (double sigma : {0.02, 0.05, 0.10}) {
        const Scenario s = with_sigma(prob.scenario, sigma);
        const auto scl = run_batch(s, prob.graph, Variant::SCL, 1e-3, T, L);
        const auto tcl = run_batch(s, prob.graph, Variant::TCL, 1e-3, T, L);
        const auto gs = run_batch(s, prob.graph, Variant::GS, 1e-3, T, L);
        const auto jj = run_batch(s, prob.graph, Variant::J, 1e-3, T, L);

        ok5 = ok5 && gs.rep.inc_rmse <= scl.rep.inc_rmse / 100.0 &&
              jj.rep.inc_rmse <= scl.rep.inc_rmse / 100.0;
        d5 += "s=" + std::to_string(sigma) + " inc(scl/gs/j)=" + std::to_string(scl.rep.inc_rmse) +
              "/" + std::to_string(gs.rep.inc_rmse) + "/" + std::to_string(jj.rep.inc_rmse) + " ";

        ok6 = ok6 && gs.max_err <= scl.max_err && jj.max_err <= scl.max_err &&
              tcl.max_err <= 1.1 * gs.max_err;
        d6 += "s=" + std::to_string(sigma) + " maxerr(scl/gs/j/tcl)=" + std::to_string(scl.max_err) +
              "/" + std::to_string(gs.max_err) + "/" + std::to_string(jj.max_err) + "/" +
              std::to_string(tcl.max_err) + " ";
    }
    report(5, ok5, d5);
    report(6, ok6, d6);
}

// ---------------------------------------------------------------------
// criterion 7: O(1/t) Lagrangian-gap monitors against a 2000-iteration
// reference run
void criterion_7() {
    const Problem prob = reference_problem(0.05);
    const auto meas = generate_measurements(prob.scenario, kBaseSeed + 1);
    RunConfig ref_cfg;
    ref_cfg.variant = Variant::GS;
    ref_cfg.iterations = 2000;
    ref_cfg.rho = 1e-3;
    const auto ref = run(prob.scenario, prob.graph, meas, ref_cfg);
    const auto& p_ref = ref.iterations.back().states;

    bool ok = true;
    std::string detail;
    for (Variant var : {Variant::GS, Variant::J}) {
        RunConfig cfg;
        cfg.variant = var;
        cfg.iterations = 100;
        cfg.rho = 1e-3;
        const auto rec = run(prob.scenario, prob.graph, meas, cfg);
        const auto diag = lagrangian_gap(rec, prob.scenario, meas, prob.graph, p_ref, ref.final_duals);
        const double c = (var == Variant::GS) ? diag.c0 : diag.c1;
        double worst_prod = 0.0, min_gap = 1e300;
        for (std::size_t t = 0; t < diag.gap.size(); ++t) {
            worst_prod = std::max(worst_prod, diag.gap[t] * static_cast<double>(t + 2));
            min_gap = std::min(min_gap, diag.gap[t]);
        }
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (int t = 5; t <= 100; ++t) {
            const double gv = diag.gap[static_cast<std::size_t>(t - 1)];
            if (gv <= 0.0) continue;
            const double lx = std::log(static_cast<double>(t)), ly = std::log(gv);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++n;
        }
        const double slope = (n > 1) ? (n * sxy - sx * sy) / (n * sxx - sx * sx) : 0.0;
        ok = ok && worst_prod <= c && min_gap >= -1e-6 && slope <= -0.9;
        detail += to_string(var) + " gap*(t+1)<=" + std::to_string(worst_prod) + " vs c=" +
                  std::to_string(c) + " slope=" + std::to_string(slope) + " ";
    }
    report(7, ok, detail);
}

// ---------------------------------------------------------------------
// criterion 8: at rho = 0.1 the sequential schedule reaches consensus
// gap 1e-2 in fewer iterations than the parallel one
void criterion_8() {
    const Problem prob = reference_problem(0.05);
    const auto meas = generate_measurements(prob.scenario, kBaseSeed + 1);
    int its[2] = {-1, -1};
    int idx = 0;
    for (Variant var : {Variant::GS, Variant::J}) {
        RunConfig cfg;
        cfg.variant = var;
        cfg.iterations = 200;
        cfg.rho = 0.1;
        const auto rec = run(prob.scenario, prob.graph, meas, cfg);
        for (std::size_t t = 1; t < rec.iterations.size(); ++t)
            if (rec.iterations[t].consensus_gap <= 1e-2) {
                its[idx] = static_cast<int>(t);
                break;
            }
        ++idx;
    }
    const bool ok = its[0] > 0 && its[1] > 0 && its[0] < its[1];
    report(8, ok,
           "iterations to gap 1e-2: gs=" + std::to_string(its[0]) + " j=" + std::to_string(its[1]));
}

// ---------------------------------------------------------------------
// criterion 9: gamma rule vs a dense eigensolver on random connected graphs
void criterion_9() {
    std::mt19937_64 rng(9);
    bool ok = true;
    double worst_margin = 1e300;
    for (int trial = 0; trial < 50; ++trial) {
        const int m = 2 + static_cast<int>(rng() % 7);  // 2..8
        std::vector<std::pair<int, int>> edges;
        for (int j = 2; j <= m; ++j)
            edges.emplace_back(1 + static_cast<int>(rng() % static_cast<unsigned>(j - 1)), j);
        for (int extra = 0; extra < m; ++extra) {
            const int a = 1 + static_cast<int>(rng() % static_cast<unsigned>(m));
            const int b = 1 + static_cast<int>(rng() % static_cast<unsigned>(m));
            if (a < b && std::find(edges.begin(), edges.end(), std::make_pair(a, b)) == edges.end())
                edges.emplace_back(a, b);
        }
        const ClusterGraph g(m, edges);
        const auto inc = incidence_matrix(g, 1);
        Eigen::SelfAdjointEigenSolver<Mat> es(inc.C.transpose() * inc.C);
        const double alpha_oracle = es.eigenvalues().maxCoeff();
        const auto gamma = select_gamma(g);
        for (int i = 1; i <= m; ++i) {
            const double lhs =
                static_cast<double>(g.degree(i)) + 1.0 + gamma[static_cast<std::size_t>(i - 1)];
            ok = ok && lhs >= alpha_oracle - 1e-9;
            worst_margin = std::min(worst_margin, lhs - alpha_oracle);
        }
    }
    report(9, ok, "50 random graphs, worst margin " + std::to_string(worst_margin));
}

// ---------------------------------------------------------------------
// criterion 10: invariant suites
void criterion_10() {
    bool ok = true;
    std::string detail;

    // finite-difference gradient / Hessian check
    {
        Cluster cl;
        cl.id = 1;
        int id = 1;
        for (auto [px, py] : {std::pair{0.0, 0.0}, {4.0, 0.0}, {0.0, 4.0}}) {
            Sensor s;
            s.id = id++;
            s.position = Vec(2);
            s.position << px, py;
            s.sigma = 0.4;
            cl.sensors.push_back(std::move(s));
        }
        Vec r(3);
        r << 1.5, 3.2, 3.1;
        SubproblemSpec sp = assemble_subproblem(cl, r, {}, {}, Vec::Zero(2), 1e-3, 0.0, Variant::SCL);
        sp.g << 0.3, -0.2;
        clusterloc::detail::BarrierProblem<double> prob(sp);
        Vec v(6);
        v << 0.2, 0.3, 9.0, 1.5, 1.4, 1.3;
        Vec grad;
        Mat hess;
        prob.derivatives(v, 0.37, grad, hess);
        const double h = 1e-5;
        bool fd_ok = true;
        for (int a = 0; a < 6; ++a) {
            Vec vp = v, vm = v;
            vp[a] += h;
            vm[a] -= h;
            const double fd = (prob.value(vp, 0.37) - prob.value(vm, 0.37)) / (2.0 * h);
            fd_ok = fd_ok && std::abs(grad[a] - fd) <= 1e-4 * std::max(1.0, std::abs(fd));
            Vec gp, gm;
            Mat dummy;
            prob.derivatives(vp, 0.37, gp, dummy);
            prob.derivatives(vm, 0.37, gm, dummy);
            for (int b = 0; b < 6; ++b) {
                const double fdh = (gp[b] - gm[b]) / (2.0 * h);
                fd_ok = fd_ok && std::abs(hess(a, b) - fdh) <= 1e-4 * std::max(1.0, std::abs(fdh));
            }
        }
        ok = ok && fd_ok;
        detail += std::string("fd=") + (fd_ok ? "ok" : "BAD") + " ";
    }

    // Schur scalar form vs 2x2 eigenvalue test
    {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> U(0.0, 3.0);
        bool schur_ok = true;
        for (int i = 0; i < 1000; ++i) {
            const double d = U(rng), eps = U(rng);
            Mat M(2, 2);
            M << 1.0, d, d, eps;
            Eigen::SelfAdjointEigenSolver<Mat> es(M);
            schur_ok = schur_ok && (es.eigenvalues().minCoeff() >= -1e-12) == (eps - d * d >= -1e-12);
        }
        ok = ok && schur_ok;
        detail += std::string("schur=") + (schur_ok ? "ok" : "BAD") + " ";
    }

    // dual telescoping and J-round schedule independence on a short run
    {
        const Problem prob = reference_problem(0.2);
        const auto meas = generate_measurements(prob.scenario, kBaseSeed + 1);
        bool tel_ok = true;
        for (Variant var : {Variant::GS, Variant::J}) {
            RunConfig cfg;
            cfg.variant = var;
            cfg.iterations = 5;
            cfg.rho = 0.01;
            const auto rec = run(prob.scenario, prob.graph, meas, cfg);
            for (std::size_t e = 0; e < rec.final_duals.edges.size(); ++e) {
                auto [i, j] = rec.final_duals.edges[e];
                Vec acc = Vec::Zero(2);
                for (std::size_t t = 1; t < rec.iterations.size(); ++t)
                    acc += cfg.rho * (rec.iterations[t].states[static_cast<std::size_t>(i - 1)].x -
                                      rec.iterations[t].states[static_cast<std::size_t>(j - 1)].x);
                tel_ok = tel_ok &&
                         (rec.final_duals.lambda_e[e] - acc).norm() <= 1e-9 * (1.0 + acc.norm());
            }
        }
        ok = ok && tel_ok;
        detail += std::string("telescoping=") + (tel_ok ? "ok" : "BAD") + " ";

        RunConfig cfg;
        cfg.variant = Variant::J;
        cfg.rho = 0.01;
        const auto gamma = select_gamma(prob.graph);
        auto run_order = [&](const std::vector<int>& order) {
            std::vector<LocalState> states;
            for (const auto& cl : prob.scenario.clusters)
                states.push_back(LocalState::zero(static_cast<int>(cl.sensors.size()), 2));
            DualState duals = DualState::zero(prob.graph, 2);
            Mailbox mail(3);
            for (int i = 1; i <= 3; ++i) mail.post(i, 0, states[static_cast<std::size_t>(i - 1)].x);
            for (int t = 0; t < 3; ++t)
                j_round(prob.scenario, meas, prob.graph.edges, states, duals, cfg, gamma, mail, t,
                        &order);
            return states;
        };
        const auto fwd = run_order({1, 2, 3});
        const auto rev = run_order({3, 2, 1});
        bool sched_ok = true;
        for (int i = 0; i < 3; ++i)
            sched_ok = sched_ok && (fwd[static_cast<std::size_t>(i)].x -
                                    rev[static_cast<std::size_t>(i)].x)
                                           .norm() <= 1e-12;
        ok = ok && sched_ok;
        detail += std::string("j-schedule=") + (sched_ok ? "ok" : "BAD") + " ";
    }

    // metric formulas
    {
        Vec xt = Vec::Zero(2);
        Vec a(2), b(2), c(2), d(2);
        a << 1.0, 0.0;
        b << 0.0, 2.0;
        c << 3.0, 0.0;
        d << 3.0, 4.0;
        const auto rep = compute_metrics({{a, b}, {c, d}}, xt);
        const bool met_ok = std::abs(rep.err_rmse[0] - std::sqrt(5.0)) <= 1e-12 &&
                            std::abs(rep.err_rmse[1] - std::sqrt(14.5)) <= 1e-12 &&
                            std::abs(rep.inc_rmse - std::sqrt(10.5)) <= 1e-12;
        ok = ok && met_ok;
        detail += std::string("metrics=") + (met_ok ? "ok" : "BAD");
    }

    report(10, ok, detail);
}

}  // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criteria_4_5_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    return g_failures;
}
