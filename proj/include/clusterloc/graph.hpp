#pragma once

// Cluster-head communication topology: incidence matrix C, its negative
// part H = min(0, C), connectivity, and the spectral bound alpha_max of
// C^T C used by the parallel variant's gamma rule.

#include "clusterloc/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace clusterloc {

struct ClusterGraph {
    int m = 0;
    std::vector<std::pair<int, int>> edges;  // (i, j) with 1 <= i < j <= m, sorted lexicographically

    ClusterGraph() = default;
    ClusterGraph(int m_, std::vector<std::pair<int, int>> e) : m(m_), edges(std::move(e)) {
        std::sort(edges.begin(), edges.end());
        for (std::size_t k = 0; k < edges.size(); ++k) {
            auto [i, j] = edges[k];
            if (i < 1 || j > m || i >= j)
                throw std::invalid_argument("graph: edge must satisfy 1 <= i < j <= m");
            if (k > 0 && edges[k] == edges[k - 1])
                throw std::invalid_argument("graph: duplicate edge");
        }
    }

    /// Neighbor set B_i (1-based cluster id).
    std::vector<int> neighbors(int i) const {
        std::vector<int> b;
        for (auto [u, v] : edges) {
            if (u == i) b.push_back(v);
            if (v == i) b.push_back(u);
        }
        std::sort(b.begin(), b.end());
        return b;
    }

    int degree(int i) const { return static_cast<int>(neighbors(i).size()); }
};

/// Connected components, each a sorted list of 1-based cluster ids.
inline std::vector<std::vector<int>> check_connected(const ClusterGraph& g) {
    std::vector<int> comp(g.m + 1, 0);
    int ncomp = 0;
    for (int s = 1; s <= g.m; ++s) {
        if (comp[s]) continue;
        ++ncomp;
        std::vector<int> stack{s};
        comp[s] = ncomp;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v : g.neighbors(u))
                if (!comp[v]) {
                    comp[v] = ncomp;
                    stack.push_back(v);
                }
        }
    }
    std::vector<std::vector<int>> out(ncomp);
    for (int i = 1; i <= g.m; ++i) out[comp[i] - 1].push_back(i);
    return out;
}

inline bool is_connected(const ClusterGraph& g) { return check_connected(g).size() == 1; }

struct IncidenceMatrices {
    Mat C;  // |E|*D x m*D, block row per edge: +I_D at column block i, -I_D at block j
    Mat H;  // entrywise min(0, C)
    double alpha_max = 0.0;
};

/// Largest eigenvalue of C^T C by power iteration (relative tolerance 1e-9).
/// For D = 1 this matrix is the graph Laplacian; higher D only repeats
/// eigenvalues D-fold, so callers pass the D = 1 matrix.
inline double spectral_bound(const Mat& C) {
    if (C.size() == 0 || C.norm() == 0.0)
        throw std::invalid_argument("spectral_bound: C must be nonzero");
    const Mat L = C.transpose() * C;
    const Eigen::Index n = L.rows();
    // generic start: a structured vector (constant or linear ramp) can be
    // exactly orthogonal to the top eigenvector on symmetric graphs
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = 1.0 + 0.5 * std::sin(3.7 * static_cast<double>(i) + 1.1);
    v.normalize();
    for (int it = 0; it < 100000; ++it) {
        Vec w = L * v;
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        w /= nw;
        const double lambda = w.dot(L * w);
        if ((L * w - lambda * w).norm() <= 1e-11 * std::max(1.0, lambda)) return lambda;
        v = w;
    }
    throw std::runtime_error("spectral_bound: power iteration did not converge in 10^5 iterations");
}

/// Edge-node incidence matrix with D x D identity blocks, block rows in
/// lexicographic edge order.
inline IncidenceMatrices incidence_matrix(const ClusterGraph& g, int D) {
    if (D < 1 || D > 3) throw std::invalid_argument("incidence_matrix: D must be 1, 2, or 3");
    const int E = static_cast<int>(g.edges.size());
    IncidenceMatrices out;
    out.C = Mat::Zero(static_cast<Eigen::Index>(E) * D, static_cast<Eigen::Index>(g.m) * D);
    for (int e = 0; e < E; ++e) {
        auto [i, j] = g.edges[static_cast<std::size_t>(e)];
        out.C.block(e * D, (i - 1) * D, D, D) = Mat::Identity(D, D);
        out.C.block(e * D, (j - 1) * D, D, D) = -Mat::Identity(D, D);
    }
    out.H = out.C.cwiseMin(0.0);
    if (E > 0) {
        Mat C1 = Mat::Zero(E, g.m);
        for (int e = 0; e < E; ++e) {
            auto [i, j] = g.edges[static_cast<std::size_t>(e)];
            C1(e, i - 1) = 1.0;
            C1(e, j - 1) = -1.0;
        }
        out.alpha_max = spectral_bound(C1);
    }
    return out;
}

inline Mat h_matrix(const Mat& C) { return C.cwiseMin(0.0); }

}  // namespace clusterloc
