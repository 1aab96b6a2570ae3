#pragma once

// Per-cluster convex subproblem: the relaxed range-localization cost
// plus augmented-Lagrangian coupling terms, minimized over the Schur
// relaxed feasible set with a log-barrier Newton method.
//
// The epsilon variables are eliminated through the affine link
//   eps_k(x, y) = y - 2 x.a_k + |a_k|^2
// leaving variables (x, y, d) with smooth convex constraints
//   eps_k(x, y) >= d_k^2,   d_k >= 0,   y >= |x|^2.

#include "clusterloc/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace clusterloc {

inline constexpr double kSigmaFloor = 1e-3;
inline constexpr double kFeasTol = 1e-6;

/// One cluster's relaxed decision variables p_i = (eps, d, y, x).
struct LocalState {
    Vec eps;  // length N, distance^2 units
    Vec d;    // length N, distance units
    double y = 0.0;
    Vec x;  // length D

    static LocalState zero(int n_sensors, int dimension) {
        LocalState s;
        s.eps = Vec::Zero(n_sensors);
        s.d = Vec::Zero(n_sensors);
        s.y = 0.0;
        s.x = Vec::Zero(dimension);
        return s;
    }
};

enum class Variant { GS, J, SCL, TCL };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::GS: return "gs";
        case Variant::J: return "j";
        case Variant::SCL: return "scl";
        case Variant::TCL: return "tcl";
    }
    return "?";
}

/// Quadratic pull (w/2) * |x - z|^2 toward a neighbor or self estimate.
struct QuadraticAnchor {
    double weight = 0.0;
    Vec target;
};

/// Fully assembled local objective:
///   sum_k w_k (eps_k - 2 d_k r_k + r_k^2) + g.x + sum_j (w_j/2)|x - z_j|^2
/// with w_k the sigma-floored inverse noise variances.
struct SubproblemSpec {
    std::vector<Vec> anchors_pos;  // sensor positions a_k
    Vec r;                         // measurements
    Vec weight;                    // sigma^{-2} with the sigma floor applied
    Vec g;                         // linear dual vector, length D (zero if none)
    std::vector<QuadraticAnchor> quad;
    Variant variant = Variant::SCL;

    int n() const { return static_cast<int>(anchors_pos.size()); }
    int dim() const { return static_cast<int>(g.size()); }
};

struct BarrierSettings {
    double mu0 = 1.0;
    double mu_shrink = 0.2;
    double mu_min = 1e-9;
    double newton_tol = 1e-4;  // squared-Newton-decrement stage tolerance
    int max_newton = 100;      // per barrier stage
    double armijo = 0.3;
    double backtrack = 0.5;
};

inline double floored_weight(double sigma) {
    return 1.0 / (std::max(sigma, kSigmaFloor) * std::max(sigma, kSigmaFloor));
}

/// f_i = sum_k sigma_k^{-2} (eps_k - 2 d_k r_k + r_k^2). Linear in (eps, d).
inline double local_cost(const Cluster& cl, const Vec& r, const LocalState& st) {
    const int n = static_cast<int>(cl.sensors.size());
    if (r.size() != n || st.eps.size() != n || st.d.size() != n)
        throw std::invalid_argument("local_cost: dimension mismatch");
    double f = 0.0;
    for (int k = 0; k < n; ++k) {
        if (cl.sensors[static_cast<std::size_t>(k)].sigma == 0.0)
            throw std::invalid_argument("local_cost: sigma = 0 gives infinite weight; apply a sigma floor");
        const double w = floored_weight(cl.sensors[static_cast<std::size_t>(k)].sigma);
        f += w * (st.eps[k] - 2.0 * st.d[k] * r[k] + r[k] * r[k]);
    }
    return f;
}

/// Same formula evaluated from an assembled spec (weights already floored).
inline double spec_cost(const SubproblemSpec& spec, const LocalState& st) {
    double f = 0.0;
    for (int k = 0; k < spec.n(); ++k)
        f += spec.weight[k] * (st.eps[k] - 2.0 * st.d[k] * spec.r[k] + spec.r[k] * spec.r[k]);
    return f;
}

struct ConstraintViolation {
    std::string name;
    double amount;  // positive = violated by this much
};

struct ViolationReport {
    std::vector<ConstraintViolation> items;
    double max_violation = 0.0;
    bool feasible = true;
};

inline ViolationReport verify_constraints(const Cluster& cl, const LocalState& st,
                                          double tol = kFeasTol) {
    const int n = static_cast<int>(cl.sensors.size());
    if (st.eps.size() != n || st.d.size() != n || st.x.size() != cl.sensors[0].position.size())
        throw std::invalid_argument("verify_constraints: dimension mismatch");
    ViolationReport rep;
    auto add = [&](std::string name, double v) {
        rep.items.push_back({std::move(name), v});
        rep.max_violation = std::max(rep.max_violation, v);
    };
    for (int k = 0; k < n; ++k) {
        const Vec& a = cl.sensors[static_cast<std::size_t>(k)].position;
        const double link = st.y - 2.0 * st.x.dot(a) + a.squaredNorm() - st.eps[k];
        add("link[" + std::to_string(k + 1) + "]", std::abs(link));
        add("schur[" + std::to_string(k + 1) + "]", st.d[k] * st.d[k] - st.eps[k]);
        add("d_nonneg[" + std::to_string(k + 1) + "]", -st.d[k]);
        add("eps_nonneg[" + std::to_string(k + 1) + "]", -st.eps[k]);
    }
    add("y_schur", st.x.squaredNorm() - st.y);
    add("y_nonneg", -st.y);
    rep.feasible = rep.max_violation <= tol;
    return rep;
}

namespace detail {

/// Objective + mu * barrier in the reduced variables v = [x; y; d].
///
/// Templated on the scalar so the path-following loop can run in extended
/// precision: near the end of the path the active slacks shrink to roughly
/// mu / weight, which with the sigma floor drops below what double-precision
/// cancellation in eps_k - d_k^2 can resolve.
///
/// The problem is stored in a frame translated so the sensor centroid sits
/// at the origin (an exact affine change of variables: x~ = x - c,
/// y~ = y - 2 c.x + |c|^2 preserves every constraint and, up to a constant,
/// the objective). With small |a_k| the barrier gradients of the Schur
/// slacks have tiny x-components, so rounding noise from the stiff slack
/// terms no longer leaks into the poorly observed cross-range directions.
template <typename Scalar>
struct BarrierProblem {
    using VecS = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using MatS = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    int D, N;
    std::vector<VecS> anchors;  // centroid-shifted sensor positions
    VecS r, weight, g;
    std::vector<std::pair<Scalar, VecS>> quad;  // (weight, shifted target)
    VecS shift;                                 // centroid c in the original frame

    explicit BarrierProblem(const SubproblemSpec& s) : D(s.dim()), N(s.n()) {
        Vec c = Vec::Zero(D);
        for (const auto& a : s.anchors_pos) c += a;
        c /= static_cast<double>(N);
        shift = c.cast<Scalar>();
        for (const auto& a : s.anchors_pos) anchors.push_back((a - c).cast<Scalar>().eval());
        r = s.r.cast<Scalar>();
        weight = s.weight.cast<Scalar>();
        g = s.g.cast<Scalar>();
        for (const auto& q : s.quad)
            quad.emplace_back(static_cast<Scalar>(q.weight), (q.target - c).cast<Scalar>().eval());
    }

    Scalar eps_k(const VecS& v, int k) const {
        const VecS& a = anchors[static_cast<std::size_t>(k)];
        return v[D] - Scalar(2) * v.head(D).dot(a) + a.squaredNorm();
    }

    /// Constraint slacks [eps_k - d_k^2 ..., d_k ..., y - |x|^2].
    VecS slacks(const VecS& v) const {
        VecS s(2 * N + 1);
        for (int k = 0; k < N; ++k) {
            const Scalar dk = v[D + 1 + k];
            s[k] = eps_k(v, k) - dk * dk;
            s[N + k] = dk;
        }
        s[2 * N] = v[D] - v.head(D).squaredNorm();
        return s;
    }

    bool strictly_feasible(const VecS& v) const {
        if (v[D] - v.head(D).squaredNorm() <= Scalar(0)) return false;
        for (int k = 0; k < N; ++k) {
            if (v[D + 1 + k] <= Scalar(0)) return false;
            if (eps_k(v, k) - v[D + 1 + k] * v[D + 1 + k] <= Scalar(0)) return false;
        }
        return true;
    }

    Scalar objective(const VecS& v) const {
        Scalar f = 0;
        for (int k = 0; k < N; ++k) {
            const Scalar dk = v[D + 1 + k];
            f += weight[k] * (eps_k(v, k) - Scalar(2) * dk * r[k] + r[k] * r[k]);
        }
        f += g.dot(v.head(D));
        for (const auto& [w, z] : quad) f += Scalar(0.5) * w * (v.head(D) - z).squaredNorm();
        return f;
    }

    Scalar value(const VecS& v, Scalar mu) const {
        using std::log;
        Scalar f = objective(v);
        Scalar phi = -log(v[D] - v.head(D).squaredNorm());
        for (int k = 0; k < N; ++k) {
            const Scalar dk = v[D + 1 + k];
            phi -= log(eps_k(v, k) - dk * dk) + log(dk);
        }
        return f + mu * phi;
    }

    void derivatives(const VecS& v, Scalar mu, VecS& grad, MatS& hess) const {
        const int n = D + 1 + N;
        grad = VecS::Zero(n);
        hess = MatS::Zero(n, n);
        const VecS x = v.head(D);
        // data term
        for (int k = 0; k < N; ++k) {
            const VecS& a = anchors[static_cast<std::size_t>(k)];
            grad.head(D) -= Scalar(2) * weight[k] * a;
            grad[D] += weight[k];
            grad[D + 1 + k] -= Scalar(2) * weight[k] * r[k];
        }
        grad.head(D) += g;
        for (const auto& [w, z] : quad) {
            grad.head(D) += w * (x - z);
            hess.topLeftCorner(D, D) += w * MatS::Identity(D, D);
        }
        // barrier: -log(eps_k - d_k^2), -log d_k
        for (int k = 0; k < N; ++k) {
            const VecS& a = anchors[static_cast<std::size_t>(k)];
            const Scalar dk = v[D + 1 + k];
            const Scalar s = eps_k(v, k) - dk * dk;
            VecS gs = VecS::Zero(n);  // gradient of s
            gs.head(D) = Scalar(-2) * a;
            gs[D] = Scalar(1);
            gs[D + 1 + k] = Scalar(-2) * dk;
            grad -= (mu / s) * gs;
            hess += (mu / (s * s)) * gs * gs.transpose();
            hess(D + 1 + k, D + 1 + k) += Scalar(2) * mu / s;  // -(mu/s) * d^2 s/dd^2
            grad[D + 1 + k] -= mu / dk;
            hess(D + 1 + k, D + 1 + k) += mu / (dk * dk);
        }
        // barrier: -log(y - |x|^2)
        {
            const Scalar u = v[D] - x.squaredNorm();
            VecS gu = VecS::Zero(n);
            gu.head(D) = Scalar(-2) * x;
            gu[D] = Scalar(1);
            grad -= (mu / u) * gu;
            hess += (mu / (u * u)) * gu * gu.transpose();
            hess.topLeftCorner(D, D) += (Scalar(2) * mu / u) * MatS::Identity(D, D);
        }
    }

    /// Problem magnitude used to size the initial barrier weight.
    Scalar gradient_scale() const {
        Scalar s = 1;
        for (int k = 0; k < N; ++k) s += weight[k] * (Scalar(1) + r[k] * r[k]);
        s += g.norm();
        for (const auto& [w, z] : quad) s += w * (Scalar(1) + z.norm());
        return s;
    }
};

}  // namespace detail

struct SolveInfo {
    std::vector<double> outer_objectives;  // objective value after each barrier stage
    int newton_iterations = 0;
};

/// Barrier path-following solve. Returns a strictly feasible minimizer of
/// the spec objective over the relaxed constraint set.
inline LocalState solve_subproblem(const SubproblemSpec& spec, const BarrierSettings& settings,
                                   SolveInfo* info = nullptr) {
    if (spec.n() < 1) throw std::invalid_argument("solve_subproblem: at least one sensor required");
    const int D = spec.dim();
    const int N = spec.n();
    // Extended precision for the path-following loop; see BarrierProblem.
    using S = long double;
    using VecS = Eigen::Matrix<S, Eigen::Dynamic, 1>;
    using MatS = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    detail::BarrierProblem<S> prob(spec);

    // Strictly feasible start: sensor centroid (origin of the shifted
    // frame), y one above |x|^2.
    VecS v = VecS::Zero(D + 1 + N);
    v[D] = S(1);
    for (int k = 0; k < N; ++k) {
        const S ek = prob.eps_k(v, k);
        v[D + 1 + k] = std::min(std::max(prob.r[k], S(1e-3)), S(0.9) * std::sqrt(ek));
    }
    if (!prob.strictly_feasible(v))
        throw std::runtime_error("solve_subproblem: no strictly feasible start found");

    const S gscale = prob.gradient_scale();
    // Start the path where the barrier dominates the data term, so the
    // centroid start is near-centered; mu0 only sets the floor.
    const S mu_start = std::max(S(settings.mu0), gscale);
    VecS grad;
    MatS hess;
    for (S mu = mu_start; mu >= S(settings.mu_min); mu *= S(settings.mu_shrink)) {
        int it = 0;
        S lam2 = 0;  // squared Newton decrement of (f + mu*phi)/mu
        for (; it < settings.max_newton; ++it) {
            prob.derivatives(v, mu, grad, hess);
            Eigen::LDLT<MatS> ldlt(hess);
            VecS step = ldlt.solve(-grad);
            bool newton_ok = step.allFinite() && grad.dot(step) < S(0);
            lam2 = newton_ok ? std::max(S(0), step.dot(hess * step)) / mu : S(1);
            // The decrement is affine-invariant, so this tolerance works for
            // both the stiff range directions and the flat cross-range ones,
            // unlike any fixed gradient-norm threshold.
            if (newton_ok && lam2 <= S(settings.newton_tol)) break;
            if (!newton_ok) {
                // fall back to a damped gradient direction
                step = -grad / gscale;
            }
            // Damp by the self-concordance decrement: the damped step stays
            // strictly feasible and cannot slam into a constraint boundary.
            const S lam = std::sqrt(lam2);
            S alpha = (lam > S(0.25)) ? S(1) / (S(1) + lam) : S(1);
            // extra guard: keep every slack at >= 1% of its current value,
            // a collapsed slack makes the Hessian numerically singular
            const VecS s_old = prob.slacks(v);
            auto slack_ok = [&](S a) {
                const VecS vn = v + a * step;
                if (!prob.strictly_feasible(vn)) return false;
                const VecS s_new = prob.slacks(vn);
                for (Eigen::Index c = 0; c < s_new.size(); ++c)
                    if (s_new[c] < S(0.01) * s_old[c]) return false;
                return true;
            };
            while (alpha > S(1e-18) && !slack_ok(alpha)) alpha *= S(settings.backtrack);
            const S f0 = prob.value(v, mu);
            const S slope = grad.dot(step);
            bool moved = false;
            while (alpha > S(1e-18)) {
                if (prob.value(v + alpha * step, mu) <= f0 + S(settings.armijo) * alpha * slope) {
                    v += alpha * step;
                    moved = true;
                    break;
                }
                alpha *= S(settings.backtrack);
            }
            // step below numerical resolution: the stage is as converged
            // as the working precision allows near the boundary
            if (!moved || alpha * step.norm() <= S(1e-16) * (S(1) + v.norm())) break;
        }
        if (info) {
            info->outer_objectives.push_back(static_cast<double>(prob.objective(v)));
            info->newton_iterations += it;
        }
        if (it >= settings.max_newton && lam2 > S(1))
            throw std::runtime_error("solve_subproblem: Newton cap exceeded, decrement^2 = " +
                                     std::to_string(static_cast<double>(lam2)));
    }

    // Map back to the original frame: x = x~ + c, y = y~ + 2 c.x~ + |c|^2.
    LocalState st;
    const VecS x_shifted = v.head(D);
    st.x = (x_shifted + prob.shift).template cast<double>();
    st.y = static_cast<double>(v[D] + S(2) * prob.shift.dot(x_shifted) + prob.shift.squaredNorm());
    st.d = v.segment(D + 1, N).template cast<double>();
    st.eps = Vec(N);
    for (int k = 0; k < N; ++k) st.eps[k] = static_cast<double>(prob.eps_k(v, k));
    return st;
}

/// Centralized baseline: one relaxation over the union of all measurements.
inline LocalState solve_centralized(const Scenario& s, const MeasurementSet& meas,
                                    const BarrierSettings& settings) {
    SubproblemSpec spec;
    spec.variant = Variant::TCL;
    spec.g = Vec::Zero(s.dimension);
    for (std::size_t i = 0; i < s.clusters.size(); ++i)
        for (std::size_t k = 0; k < s.clusters[i].sensors.size(); ++k) {
            spec.anchors_pos.push_back(s.clusters[i].sensors[k].position);
            const Eigen::Index n = static_cast<Eigen::Index>(spec.anchors_pos.size());
            spec.r.conservativeResize(n);
            spec.weight.conservativeResize(n);
            spec.r[n - 1] = meas.ranges[i][static_cast<Eigen::Index>(k)];
            spec.weight[n - 1] = floored_weight(s.clusters[i].sensors[k].sigma);
        }
    if (spec.anchors_pos.empty())
        throw std::invalid_argument("solve_centralized: no sensors");
    return solve_subproblem(spec, settings);
}

/// Builds one cluster's update objective.
///
/// GS: neighbors j < i contribute their fresh estimate, j >= i their
/// previous one, plus a self term (rho/2)|x - x_i^t|^2. J: all neighbors
/// at the previous iterate, self and proximal terms merged into weight
/// rho * (1 + gamma_i). `neighbor_x[j]` must hold the estimate of every
/// j in B_i at the staleness the variant requires; `lambda_ij[j]` the
/// multiplier lambda_{i,j} seen from this cluster.
inline SubproblemSpec assemble_subproblem(const Cluster& cl, const Vec& r,
                                          const std::vector<std::pair<int, Vec>>& lambda_ij,
                                          const std::vector<std::pair<int, Vec>>& neighbor_x,
                                          const Vec& self_x_prev, double rho, double gamma_i,
                                          Variant variant) {
    SubproblemSpec spec;
    spec.variant = variant;
    const int n = static_cast<int>(cl.sensors.size());
    if (r.size() != n) throw std::invalid_argument("assemble_subproblem: measurement size mismatch");
    spec.r = r;
    spec.weight = Vec(n);
    for (int k = 0; k < n; ++k) {
        spec.anchors_pos.push_back(cl.sensors[static_cast<std::size_t>(k)].position);
        spec.weight[k] = floored_weight(cl.sensors[static_cast<std::size_t>(k)].sigma);
    }
    const int D = static_cast<int>(self_x_prev.size());
    spec.g = Vec::Zero(D);
    for (const auto& [j, lam] : lambda_ij) {
        bool have = false;
        for (const auto& [jj, xj] : neighbor_x) {
            (void)xj;
            have = have || jj == j;
        }
        if (!have)
            throw std::runtime_error("assemble_subproblem: missing estimate for neighbor " +
                                     std::to_string(j));
        spec.g += lam;
    }
    for (const auto& [j, xj] : neighbor_x) {
        (void)j;
        spec.quad.push_back({rho, xj});
    }
    const double self_w = (variant == Variant::J) ? rho * (1.0 + gamma_i) : rho;
    if (variant == Variant::GS || variant == Variant::J)
        spec.quad.push_back({self_w, self_x_prev});
    return spec;
}

}  // namespace clusterloc
