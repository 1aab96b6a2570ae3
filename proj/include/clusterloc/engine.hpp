#pragma once

// Orchestration of the sequential (GS) and parallel (J) consensus
// updates, the isolated (SCL) and centralized (TCL) baselines, dual
// variables, and per-iteration convergence diagnostics.

#include "clusterloc/graph.hpp"
#include "clusterloc/model.hpp"
#include "clusterloc/subsolver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace clusterloc {

/// Per-edge multipliers lambda_{i,j}, stored once per undirected edge
/// (i < j); the (j, i) view is the negation, so antisymmetry holds by
/// construction. Initialized to zero.
struct DualState {
    std::vector<std::pair<int, int>> edges;
    std::vector<Vec> lambda_e;

    static DualState zero(const ClusterGraph& g, int D) {
        DualState d;
        d.edges = g.edges;
        d.lambda_e.assign(g.edges.size(), Vec::Zero(D));
        return d;
    }

    int edge_index(int i, int j) const {
        const auto key = std::minmax(i, j);
        for (std::size_t e = 0; e < edges.size(); ++e)
            if (edges[e] == std::make_pair(key.first, key.second)) return static_cast<int>(e);
        return -1;
    }

    /// lambda_{i,j}; yields -lambda_{j,i} when i > j.
    Vec lambda(int i, int j) const {
        const int e = edge_index(i, j);
        if (e < 0) throw std::invalid_argument("DualState: no edge between given clusters");
        return i < j ? lambda_e[static_cast<std::size_t>(e)] : Vec(-lambda_e[static_cast<std::size_t>(e)]);
    }

    double norm() const {
        double s = 0.0;
        for (const auto& l : lambda_e) s += l.squaredNorm();
        return std::sqrt(s);
    }
};

/// lambda' = lambda + rho (x_i - x_j) for edge (i, j), i < j.
inline Vec dual_update(const Vec& lambda_e, const Vec& x_i, const Vec& x_j, double rho) {
    return lambda_e + rho * (x_i - x_j);
}

struct EdgeFailure {
    int i = 0, j = 0;      // undirected edge, i < j
    int t_begin = 1;       // first failed iteration (1-based, inclusive)
    int t_end = 1 << 30;   // last failed iteration (inclusive)
};

struct RunConfig {
    Variant variant = Variant::GS;
    double rho = 1e-3;
    std::vector<double> gamma;  // per-cluster; empty = auto (select_gamma)
    int iterations = 50;
    BarrierSettings barrier;
    std::vector<EdgeFailure> failures;
};

/// In-process cluster-head message layer: iteration-stamped position
/// estimates. Keeps rounds deterministic and lets tests observe exactly
/// which stamp each update consumed.
struct Mailbox {
    struct Message {
        int iteration;
        Vec x;
    };
    std::vector<std::vector<Message>> posts;  // per cluster (1-based index shifted)

    explicit Mailbox(int m) : posts(static_cast<std::size_t>(m)) {}

    void post(int from, int iteration, const Vec& x) {
        posts[static_cast<std::size_t>(from - 1)].push_back({iteration, x});
    }

    /// Freshest estimate of `from` with stamp <= max_iteration.
    const Message& read(int from, int max_iteration) const {
        const auto& box = posts[static_cast<std::size_t>(from - 1)];
        const Message* best = nullptr;
        for (const auto& msg : box)
            if (msg.iteration <= max_iteration && (!best || msg.iteration > best->iteration))
                best = &msg;
        if (!best) throw std::runtime_error("Mailbox: no estimate from cluster " + std::to_string(from));
        return *best;
    }
};

struct IterationRecord {
    int t = 0;
    std::vector<LocalState> states;
    std::vector<LocalState> p_bar;      // running average of iterates 1..t
    std::vector<double> objectives;     // per-cluster f_i at the current state
    double consensus_gap = 0.0;
    double dual_norm = 0.0;
};

struct RunRecord {
    RunConfig config;
    std::vector<double> resolved_gamma;
    std::vector<IterationRecord> iterations;  // length T + 1, entry 0 = initial zeros
    DualState final_duals;
    /// Stamps consumed by sequential rounds: (iteration, i, j, stamp read).
    std::vector<std::tuple<int, int, int, int>> read_log;
};

/// max over edges of |x_i - x_j|.
inline double consensus_gap(const std::vector<LocalState>& states, const ClusterGraph& g) {
    double gap = 0.0;
    for (auto [i, j] : g.edges)
        gap = std::max(gap, (states[static_cast<std::size_t>(i - 1)].x -
                             states[static_cast<std::size_t>(j - 1)].x)
                                .norm());
    return gap;
}

/// gamma_i = max(0, alpha_max - |B_i| - 1) + margin, which makes
/// gamma_i' = sqrt(|B_i| + 1 + gamma_i) >= sqrt(alpha_max).
inline std::vector<double> select_gamma(const ClusterGraph& g, double margin = 1e-6) {
    std::vector<double> gamma(static_cast<std::size_t>(g.m), margin);
    if (g.edges.empty()) return gamma;
    const double alpha = incidence_matrix(g, 1).alpha_max;
    for (int i = 1; i <= g.m; ++i)
        gamma[static_cast<std::size_t>(i - 1)] =
            std::max(0.0, alpha - static_cast<double>(g.degree(i)) - 1.0) + margin;
    return gamma;
}

namespace detail {

inline std::vector<std::pair<int, int>> active_edges(const ClusterGraph& g,
                                                     const std::vector<EdgeFailure>& failures,
                                                     int t) {
    std::vector<std::pair<int, int>> act;
    for (auto [i, j] : g.edges) {
        bool failed = false;
        for (const auto& f : failures)
            if (f.i == i && f.j == j && t >= f.t_begin && t <= f.t_end) failed = true;
        if (!failed) act.emplace_back(i, j);
    }
    return act;
}

inline std::vector<int> active_neighbors(const std::vector<std::pair<int, int>>& edges, int i) {
    std::vector<int> b;
    for (auto [u, v] : edges) {
        if (u == i) b.push_back(v);
        if (v == i) b.push_back(u);
    }
    std::sort(b.begin(), b.end());
    return b;
}

}  // namespace detail

/// One sequential sweep: clusters 1..m update in order, each consuming
/// the freshest neighbor estimates (stamp t+1 for j < i, stamp t for
/// j >= i), then every active edge's multiplier is updated.
inline void gs_round(const Scenario& s, const MeasurementSet& meas,
                     const std::vector<std::pair<int, int>>& active, std::vector<LocalState>& states,
                     DualState& duals, const RunConfig& cfg, Mailbox& mail, int t,
                     std::vector<std::tuple<int, int, int, int>>* read_log = nullptr) {
    const int m = s.cluster_count();
    for (int i = 1; i <= m; ++i) {
        std::vector<std::pair<int, Vec>> lam, nbr;
        for (int j : detail::active_neighbors(active, i)) {
            lam.emplace_back(j, duals.lambda(i, j));
            const int max_stamp = (j < i) ? t + 1 : t;
            const auto& msg = mail.read(j, max_stamp);
            if (read_log) read_log->emplace_back(t + 1, i, j, msg.iteration);
            nbr.emplace_back(j, msg.x);
        }
        auto spec = assemble_subproblem(s.clusters[static_cast<std::size_t>(i - 1)],
                                        meas.ranges[static_cast<std::size_t>(i - 1)], lam, nbr,
                                        states[static_cast<std::size_t>(i - 1)].x, cfg.rho, 0.0,
                                        Variant::GS);
        states[static_cast<std::size_t>(i - 1)] = solve_subproblem(spec, cfg.barrier);
        mail.post(i, t + 1, states[static_cast<std::size_t>(i - 1)].x);
    }
    for (std::size_t e = 0; e < duals.edges.size(); ++e) {
        auto [i, j] = duals.edges[e];
        if (std::find(active.begin(), active.end(), std::make_pair(i, j)) == active.end())
            continue;  // failed edge: multiplier frozen
        duals.lambda_e[e] = dual_update(duals.lambda_e[e], states[static_cast<std::size_t>(i - 1)].x,
                                        states[static_cast<std::size_t>(j - 1)].x, cfg.rho);
    }
}

/// One parallel sweep: every subproblem is assembled from iteration-t
/// data only, so the solve order is immaterial; `order` exists to let
/// tests permute it.
inline void j_round(const Scenario& s, const MeasurementSet& meas,
                    const std::vector<std::pair<int, int>>& active, std::vector<LocalState>& states,
                    DualState& duals, const RunConfig& cfg, const std::vector<double>& gamma,
                    Mailbox& mail, int t, const std::vector<int>* order = nullptr) {
    const int m = s.cluster_count();
    std::vector<int> ord;
    if (order) ord = *order;
    else for (int i = 1; i <= m; ++i) ord.push_back(i);
    std::vector<LocalState> next = states;
    for (int i : ord) {
        std::vector<std::pair<int, Vec>> lam, nbr;
        for (int j : detail::active_neighbors(active, i)) {
            lam.emplace_back(j, duals.lambda(i, j));
            nbr.emplace_back(j, mail.read(j, t).x);
        }
        auto spec = assemble_subproblem(s.clusters[static_cast<std::size_t>(i - 1)],
                                        meas.ranges[static_cast<std::size_t>(i - 1)], lam, nbr,
                                        states[static_cast<std::size_t>(i - 1)].x, cfg.rho,
                                        gamma[static_cast<std::size_t>(i - 1)], Variant::J);
        next[static_cast<std::size_t>(i - 1)] = solve_subproblem(spec, cfg.barrier);
    }
    states = std::move(next);
    for (int i = 1; i <= m; ++i) mail.post(i, t + 1, states[static_cast<std::size_t>(i - 1)].x);
    for (std::size_t e = 0; e < duals.edges.size(); ++e) {
        auto [i, j] = duals.edges[e];
        if (std::find(active.begin(), active.end(), std::make_pair(i, j)) == active.end()) continue;
        duals.lambda_e[e] = dual_update(duals.lambda_e[e], states[static_cast<std::size_t>(i - 1)].x,
                                        states[static_cast<std::size_t>(j - 1)].x, cfg.rho);
    }
}

/// Full trajectory of the chosen variant. SCL and TCL solve once and
/// hold constant, so iteration sweeps are well-defined for all variants.
inline RunRecord run(const Scenario& s, const ClusterGraph& g, const MeasurementSet& meas,
                     const RunConfig& cfg) {
    s.validate();
    if (g.m != s.cluster_count()) throw std::invalid_argument("run: graph size mismatch");
    if (cfg.rho <= 0.0) throw std::invalid_argument("run: rho must be positive");
    const int m = s.cluster_count();
    const int D = s.dimension;

    RunRecord rec;
    rec.config = cfg;
    rec.resolved_gamma = cfg.gamma.empty() ? select_gamma(g) : cfg.gamma;
    if (static_cast<int>(rec.resolved_gamma.size()) != m)
        throw std::invalid_argument("run: gamma size mismatch");

    std::vector<LocalState> states;
    for (const auto& cl : s.clusters)
        states.push_back(LocalState::zero(static_cast<int>(cl.sensors.size()), D));
    DualState duals = DualState::zero(g, D);
    Mailbox mail(m);
    for (int i = 1; i <= m; ++i) mail.post(i, 0, states[static_cast<std::size_t>(i - 1)].x);

    std::vector<LocalState> bar_sum = states;  // accumulates iterates 1..t
    for (auto& b : bar_sum) b = LocalState::zero(static_cast<int>(b.eps.size()), D);

    auto snapshot = [&](int t) {
        IterationRecord ir;
        ir.t = t;
        ir.states = states;
        ir.consensus_gap = consensus_gap(states, g);
        ir.dual_norm = duals.norm();
        for (int i = 0; i < m; ++i) {
            SubproblemSpec fi;
            const auto& cl = s.clusters[static_cast<std::size_t>(i)];
            for (const auto& sen : cl.sensors) {
                fi.anchors_pos.push_back(sen.position);
                fi.weight.conservativeResize(static_cast<Eigen::Index>(fi.anchors_pos.size()));
                fi.weight[static_cast<Eigen::Index>(fi.anchors_pos.size()) - 1] =
                    floored_weight(sen.sigma);
            }
            fi.r = meas.ranges[static_cast<std::size_t>(i)];
            ir.objectives.push_back(spec_cost(fi, states[static_cast<std::size_t>(i)]));
        }
        if (t >= 1) {
            ir.p_bar = bar_sum;
            for (auto& b : ir.p_bar) {
                b.eps /= t;
                b.d /= t;
                b.y /= t;
                b.x /= t;
            }
        } else {
            ir.p_bar = states;
        }
        rec.iterations.push_back(std::move(ir));
    };
    snapshot(0);

    for (int t = 0; t < cfg.iterations; ++t) {
        const auto active = detail::active_edges(g, cfg.failures, t + 1);
        switch (cfg.variant) {
            case Variant::GS:
                gs_round(s, meas, active, states, duals, cfg, mail, t, &rec.read_log);
                break;
            case Variant::J:
                j_round(s, meas, active, states, duals, cfg, rec.resolved_gamma, mail, t);
                break;
            case Variant::SCL:
                if (t == 0)
                    for (int i = 1; i <= m; ++i) {
                        auto spec = assemble_subproblem(
                            s.clusters[static_cast<std::size_t>(i - 1)],
                            meas.ranges[static_cast<std::size_t>(i - 1)], {}, {},
                            states[static_cast<std::size_t>(i - 1)].x, cfg.rho, 0.0, Variant::SCL);
                        states[static_cast<std::size_t>(i - 1)] = solve_subproblem(spec, cfg.barrier);
                    }
                break;
            case Variant::TCL:
                if (t == 0) {
                    const LocalState central = solve_centralized(s, meas, cfg.barrier);
                    for (int i = 1; i <= m; ++i) {
                        const auto& cl = s.clusters[static_cast<std::size_t>(i - 1)];
                        LocalState st = LocalState::zero(static_cast<int>(cl.sensors.size()), D);
                        st.x = central.x;
                        st.y = central.y;
                        for (std::size_t k = 0; k < cl.sensors.size(); ++k) {
                            const Vec& a = cl.sensors[k].position;
                            st.eps[static_cast<Eigen::Index>(k)] =
                                st.y - 2.0 * st.x.dot(a) + a.squaredNorm();
                            st.d[static_cast<Eigen::Index>(k)] =
                                std::sqrt(std::max(0.0, st.eps[static_cast<Eigen::Index>(k)]));
                        }
                        states[static_cast<std::size_t>(i - 1)] = std::move(st);
                    }
                }
                break;
        }
        for (int i = 0; i < m; ++i) {
            auto& b = bar_sum[static_cast<std::size_t>(i)];
            const auto& st = states[static_cast<std::size_t>(i)];
            b.eps += st.eps;
            b.d += st.d;
            b.y += st.y;
            b.x += st.x;
        }
        snapshot(t + 1);
    }
    rec.final_duals = duals;
    return rec;
}

/// Lagrangian L(p, lambda) = f(p) + lambda^T C J p evaluated edgewise.
inline double lagrangian(const Scenario& s, const MeasurementSet& meas,
                         const std::vector<LocalState>& states, const DualState& ref_duals) {
    double L = 0.0;
    for (int i = 0; i < s.cluster_count(); ++i) {
        const auto& cl = s.clusters[static_cast<std::size_t>(i)];
        for (std::size_t k = 0; k < cl.sensors.size(); ++k) {
            const double w = floored_weight(cl.sensors[k].sigma);
            const double r = meas.ranges[static_cast<std::size_t>(i)][static_cast<Eigen::Index>(k)];
            const auto& st = states[static_cast<std::size_t>(i)];
            L += w * (st.eps[static_cast<Eigen::Index>(k)] -
                      2.0 * st.d[static_cast<Eigen::Index>(k)] * r + r * r);
        }
    }
    for (std::size_t e = 0; e < ref_duals.edges.size(); ++e) {
        auto [i, j] = ref_duals.edges[e];
        L += ref_duals.lambda_e[e].dot(states[static_cast<std::size_t>(i - 1)].x -
                                       states[static_cast<std::size_t>(j - 1)].x);
    }
    return L;
}

struct GapDiagnostics {
    std::vector<double> gap;  // gap[t] = L(p_bar^{t+1}, lambda*) - L(p*, lambda*)
    double c0 = 0.0;          // sequential-variant constant
    double c1 = 0.0;          // parallel-variant constant (needs valid gamma')
};

/// Theorem-style O(1/t) diagnostics against a supplied reference
/// solution; c0 and c1 are evaluated from the run's zero initialization.
inline GapDiagnostics lagrangian_gap(const RunRecord& rec, const Scenario& s,
                                     const MeasurementSet& meas, const ClusterGraph& g,
                                     const std::vector<LocalState>& p_ref,
                                     const DualState& lambda_ref) {
    GapDiagnostics out;
    const double Lstar = lagrangian(s, meas, p_ref, lambda_ref);
    for (std::size_t t = 1; t < rec.iterations.size(); ++t)
        out.gap.push_back(lagrangian(s, meas, rec.iterations[t].p_bar, lambda_ref) - Lstar);

    const double rho = rec.config.rho;
    const int D = s.dimension;
    const auto inc = incidence_matrix(g, D);
    Vec delta(static_cast<Eigen::Index>(g.m) * D);  // J(p^0 - p*), stacked x parts
    for (int i = 0; i < g.m; ++i)
        delta.segment(i * D, D) =
            rec.iterations[0].states[static_cast<std::size_t>(i)].x - p_ref[static_cast<std::size_t>(i)].x;
    double lam0_sq = 0.0;
    for (const auto& l : lambda_ref.lambda_e) lam0_sq += l.squaredNorm();  // lambda^0 = 0
    out.c0 = lam0_sq / (2.0 * rho) +
             0.5 * rho * ((inc.H * delta).squaredNorm() + delta.squaredNorm());
    double qbar_term = 0.0;
    for (int i = 0; i < g.m; ++i) {
        const double gp2 = static_cast<double>(g.degree(i + 1)) + 1.0 +
                           rec.resolved_gamma[static_cast<std::size_t>(i)];
        qbar_term += gp2 * delta.segment(i * D, D).squaredNorm();
    }
    out.c1 = lam0_sq / (2.0 * rho) + 0.5 * rho * qbar_term;
    return out;
}

/// Iteration trace: header comments with the resolved configuration,
/// then one CSV row per (iteration, cluster) at full double precision.
inline void write_trace(std::ostream& os, const Scenario& s, const RunRecord& rec,
                        const std::vector<std::pair<std::string, std::string>>& header_kv,
                        const std::vector<double>* gaps = nullptr) {
    os << std::setprecision(17);
    for (const auto& [k, v] : header_kv) os << "# " << k << "=" << v << "\n";
    os << "t,cluster_id";
    for (int d = 0; d < s.dimension; ++d) os << ",x" << (d + 1);
    os << ",objective,consensus_gap,dual_norm,lagrangian_gap\n";
    for (const auto& ir : rec.iterations) {
        for (int i = 0; i < s.cluster_count(); ++i) {
            os << ir.t << "," << (i + 1);
            for (int d = 0; d < s.dimension; ++d)
                os << "," << ir.states[static_cast<std::size_t>(i)].x[d];
            const double gap = (gaps && ir.t >= 1 && ir.t - 1 < static_cast<int>(gaps->size()))
                                   ? (*gaps)[static_cast<std::size_t>(ir.t - 1)]
                                   : std::numeric_limits<double>::quiet_NaN();
            os << "," << ir.objectives[static_cast<std::size_t>(i)] << "," << ir.consensus_gap
               << "," << ir.dual_norm << "," << gap << "\n";
        }
    }
}

}  // namespace clusterloc
