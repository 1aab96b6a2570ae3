#pragma once

// Monte Carlo experiment runner: RMSE metrics, paired-trial seeding, and
// CSV sweep tables over rho, sigma, or iteration count.

#include "clusterloc/engine.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace clusterloc {

struct MetricsReport {
    std::vector<double> err_rmse;  // per cluster
    double inc_rmse = 0.0;
    int trials = 0;
    int excluded = 0;
    std::vector<std::vector<Vec>> estimates;  // [trial][cluster]
};

/// ERR per cluster = sqrt(sum_l |x_{i,l} - x*|^2 / L);
/// INC = sqrt(sum_l sum_{i<j} |x_{i,l} - x_{j,l}|^2 / L).
inline MetricsReport compute_metrics(const std::vector<std::vector<Vec>>& estimates, const Vec& x_true) {
    if (estimates.empty()) throw std::invalid_argument("compute_metrics: no trials");
    const std::size_t m = estimates[0].size();
    MetricsReport rep;
    rep.trials = static_cast<int>(estimates.size());
    rep.estimates = estimates;
    rep.err_rmse.assign(m, 0.0);
    double inc = 0.0;
    for (const auto& trial : estimates) {
        if (trial.size() != m) throw std::invalid_argument("compute_metrics: ragged trials");
        for (std::size_t i = 0; i < m; ++i) {
            rep.err_rmse[i] += (trial[i] - x_true).squaredNorm();
            for (std::size_t j = i + 1; j < m; ++j) inc += (trial[i] - trial[j]).squaredNorm();
        }
    }
    for (auto& e : rep.err_rmse) e = std::sqrt(e / static_cast<double>(rep.trials));
    rep.inc_rmse = std::sqrt(inc / static_cast<double>(rep.trials));
    return rep;
}

/// L paired trials with seeds base+1 .. base+L; failed trials are
/// excluded and counted rather than aborting the batch.
inline MetricsReport monte_carlo(const Scenario& s, const ClusterGraph& g, const RunConfig& cfg,
                                 int trials, std::uint64_t base_seed) {
    if (trials < 1) throw std::invalid_argument("monte_carlo: need at least one trial");
    std::vector<std::vector<Vec>> estimates;
    int excluded = 0;
    for (int l = 1; l <= trials; ++l) {
        try {
            const auto meas = generate_measurements(s, base_seed + static_cast<std::uint64_t>(l));
            const auto rec = run(s, g, meas, cfg);
            std::vector<Vec> xs;
            for (const auto& st : rec.iterations.back().states) xs.push_back(st.x);
            estimates.push_back(std::move(xs));
        } catch (const std::exception&) {
            ++excluded;
        }
    }
    if (estimates.empty()) throw std::runtime_error("monte_carlo: every trial failed");
    auto rep = compute_metrics(estimates, s.event_position);
    rep.excluded = excluded;
    return rep;
}

enum class SweepAxis { Rho, Sigma, Iterations };

inline std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::Rho: return "rho";
        case SweepAxis::Sigma: return "sigma";
        case SweepAxis::Iterations: return "iterations";
    }
    return "?";
}

struct SweepSpec {
    SweepAxis axis = SweepAxis::Rho;
    std::vector<double> values;
    RunConfig base;
    std::vector<Variant> variants{Variant::GS, Variant::J, Variant::SCL, Variant::TCL};
    int trials = 50;
    std::uint64_t base_seed = 0;
};

struct SweepRow {
    double value = 0.0;
    Variant variant = Variant::GS;
    int cluster = 0;  // 1-based
    double err_rmse = 0.0;
    double inc_rmse = 0.0;
    int trials = 0;
    bool failed = false;
};

inline Scenario with_sigma(Scenario s, double sigma) {
    for (auto& cl : s.clusters)
        for (auto& sen : cl.sensors) sen.sigma = sigma;
    return s;
}

inline std::vector<SweepRow> sweep(const Scenario& scenario, const ClusterGraph& g,
                                   const SweepSpec& spec) {
    if (spec.values.empty()) throw std::invalid_argument("sweep: empty value list");
    std::vector<SweepRow> rows;
    for (double v : spec.values) {
        for (Variant variant : spec.variants) {
            RunConfig cfg = spec.base;
            cfg.variant = variant;
            Scenario s = scenario;
            switch (spec.axis) {
                case SweepAxis::Rho: cfg.rho = v; break;
                case SweepAxis::Sigma: s = with_sigma(scenario, v); break;
                case SweepAxis::Iterations: cfg.iterations = static_cast<int>(v); break;
            }
            try {
                const auto rep = monte_carlo(s, g, cfg, spec.trials, spec.base_seed);
                for (std::size_t i = 0; i < rep.err_rmse.size(); ++i)
                    rows.push_back({v, variant, static_cast<int>(i) + 1, rep.err_rmse[i],
                                    rep.inc_rmse, rep.trials - rep.excluded, false});
            } catch (const std::exception&) {
                rows.push_back({v, variant, 0, 0.0, 0.0, 0, true});
            }
        }
    }
    return rows;
}

inline void write_sweep_csv(std::ostream& os, SweepAxis axis, const std::vector<SweepRow>& rows) {
    os << std::setprecision(17);
    os << "axis,value,variant,cluster,err_rmse,inc_rmse,trials\n";
    for (const auto& r : rows)
        os << to_string(axis) << "," << r.value << "," << to_string(r.variant) << "," << r.cluster
           << "," << r.err_rmse << "," << r.inc_rmse << "," << r.trials << "\n";
}

/// One file per (axis, variant): sweep_<axis>_<variant>.csv under dir.
inline std::vector<std::string> emit_sweep_files(const std::string& dir, SweepAxis axis,
                                                 const std::vector<SweepRow>& rows) {
    std::vector<std::string> written;
    std::vector<Variant> seen;
    for (const auto& r : rows)
        if (std::find(seen.begin(), seen.end(), r.variant) == seen.end()) seen.push_back(r.variant);
    for (Variant v : seen) {
        std::vector<SweepRow> sub;
        for (const auto& r : rows)
            if (r.variant == v) sub.push_back(r);
        const std::string path = dir + "/sweep_" + to_string(axis) + "_" + to_string(v) + ".csv";
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot write " + path);
        write_sweep_csv(f, axis, sub);
        written.push_back(path);
    }
    return written;
}

}  // namespace clusterloc
