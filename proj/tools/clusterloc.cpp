// Command-line front end: run / sweep / validate / gamma / report.
//
// Option precedence: command-line flags override --config file values,
// which override built-in defaults. Every output embeds the fully
// resolved configuration in its header.

#include "clusterloc/engine.hpp"
#include "clusterloc/graph.hpp"
#include "clusterloc/harness.hpp"
#include "clusterloc/scenario_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace clusterloc;

namespace {

struct Options {
    std::string scenario_path;
    std::string config_path;
    std::string out_path;
    std::string variant = "gs";
    double rho = 1e-3;
    std::string gamma = "auto";  // "auto" or comma-separated per-cluster values
    int iterations = 50;
    int trials = 50;
    std::uint64_t seed = 0;
    std::string axis = "rho";
    std::string values;      // comma-separated sweep values
    std::string fail_edges;  // "i-j:t0-t1,..."
};

std::vector<double> parse_doubles(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stod(tok));
    return out;
}

std::vector<EdgeFailure> parse_failures(const std::string& text) {
    std::vector<EdgeFailure> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        EdgeFailure f;
        if (std::sscanf(tok.c_str(), "%d-%d:%d-%d", &f.i, &f.j, &f.t_begin, &f.t_end) != 4)
            throw CLI::ValidationError("--fail-edges", "expected i-j:t0-t1, got '" + tok + "'");
        out.push_back(f);
    }
    return out;
}

Variant parse_variant(const std::string& v) {
    if (v == "gs") return Variant::GS;
    if (v == "j") return Variant::J;
    if (v == "scl") return Variant::SCL;
    if (v == "tcl") return Variant::TCL;
    throw CLI::ValidationError("--variant", "must be one of gs, j, scl, tcl");
}

SweepAxis parse_axis(const std::string& a) {
    if (a == "rho") return SweepAxis::Rho;
    if (a == "sigma") return SweepAxis::Sigma;
    if (a == "iterations") return SweepAxis::Iterations;
    throw CLI::ValidationError("--axis", "must be one of rho, sigma, iterations");
}

// fills opt fields from the config file unless the flag was given on the
// command line (flags > config > defaults)
void apply_config(const CLI::App& cmd, Options& opt) {
    if (opt.config_path.empty()) return;
    std::ifstream f(opt.config_path);
    if (!f) throw CLI::ValidationError("--config", "cannot read " + opt.config_path);
    nlohmann::json j;
    f >> j;
    auto overridden = [&](const std::string& flag) {
        const CLI::Option* o = cmd.get_option_no_throw(flag);
        return o != nullptr && o->count() > 0;
    };
    if (j.contains("scenario") && !overridden("--scenario"))
        opt.scenario_path = j["scenario"].get<std::string>();
    if (j.contains("out") && !overridden("--out")) opt.out_path = j["out"].get<std::string>();
    if (j.contains("variant") && !overridden("--variant"))
        opt.variant = j["variant"].get<std::string>();
    if (j.contains("rho") && !overridden("--rho")) opt.rho = j["rho"].get<double>();
    if (j.contains("gamma") && !overridden("--gamma")) {
        if (j["gamma"].is_string()) opt.gamma = j["gamma"].get<std::string>();
        else {
            std::string csv;
            for (double g : j["gamma"].get<std::vector<double>>())
                csv += (csv.empty() ? "" : ",") + std::to_string(g);
            opt.gamma = csv;
        }
    }
    if (j.contains("iterations") && !overridden("--iterations"))
        opt.iterations = j["iterations"].get<int>();
    if (j.contains("trials") && !overridden("--trials")) opt.trials = j["trials"].get<int>();
    if (j.contains("seed") && !overridden("--seed")) opt.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("axis") && !overridden("--axis")) opt.axis = j["axis"].get<std::string>();
    if (j.contains("values") && !overridden("--values")) {
        std::string csv;
        for (double v : j["values"].get<std::vector<double>>())
            csv += (csv.empty() ? "" : ",") + std::to_string(v);
        opt.values = csv;
    }
    if (j.contains("fail_edges") && !overridden("--fail-edges"))
        opt.fail_edges = j["fail_edges"].get<std::string>();
}

Problem load_or_reference(const Options& opt) {
    if (opt.scenario_path.empty()) return reference_problem();
    return load_problem(opt.scenario_path);
}

RunConfig make_run_config(const Options& opt) {
    RunConfig cfg;
    cfg.variant = parse_variant(opt.variant);
    cfg.rho = opt.rho;
    if (opt.gamma != "auto") cfg.gamma = parse_doubles(opt.gamma);
    cfg.iterations = opt.iterations;
    cfg.failures = parse_failures(opt.fail_edges);
    return cfg;
}

std::vector<std::pair<std::string, std::string>> resolved_header(const Options& opt) {
    return {{"scenario", opt.scenario_path.empty() ? "builtin-reference" : opt.scenario_path},
            {"variant", opt.variant},
            {"rho", std::to_string(opt.rho)},
            {"gamma", opt.gamma},
            {"iterations", std::to_string(opt.iterations)},
            {"trials", std::to_string(opt.trials)},
            {"seed", std::to_string(opt.seed)},
            {"fail_edges", opt.fail_edges.empty() ? "none" : opt.fail_edges}};
}

std::ostream& open_out(std::ofstream& file, const Options& opt) {
    if (opt.out_path.empty()) return std::cout;
    file.open(opt.out_path);
    if (!file) throw CLI::ValidationError("--out", "cannot write " + opt.out_path);
    return file;
}

void add_common(CLI::App* cmd, Options& opt) {
    cmd->add_option("--scenario", opt.scenario_path, "scenario JSON file (default: built-in)");
    cmd->add_option("--config", opt.config_path, "JSON config file mirroring the flags");
    cmd->add_option("--out", opt.out_path, "output path (default: stdout)");
    cmd->add_option("--variant", opt.variant, "gs | j | scl | tcl");
    cmd->add_option("--rho", opt.rho, "augmented-Lagrangian penalty");
    cmd->add_option("--gamma", opt.gamma, "'auto' or per-cluster comma list");
    cmd->add_option("--iterations", opt.iterations, "consensus iterations T");
    cmd->add_option("--trials", opt.trials, "Monte Carlo trials L");
    cmd->add_option("--seed", opt.seed, "base RNG seed; trial l uses seed+l");
    cmd->add_option("--axis", opt.axis, "sweep axis: rho | sigma | iterations");
    cmd->add_option("--values", opt.values, "comma-separated sweep values");
    cmd->add_option("--fail-edges", opt.fail_edges, "edge failures as i-j:t0-t1[,...]");
}

int cmd_run(const CLI::App& cmd, Options& opt) {
    apply_config(cmd, opt);
    const Problem prob = load_or_reference(opt);
    const RunConfig cfg = make_run_config(opt);
    const auto meas = generate_measurements(prob.scenario, opt.seed + 1);
    const auto rec = run(prob.scenario, prob.graph, meas, cfg);
    std::ofstream file;
    std::ostream& os = open_out(file, opt);
    write_trace(os, prob.scenario, rec, resolved_header(opt));
    std::cerr << "final consensus gap " << rec.iterations.back().consensus_gap << "\n";
    return 0;
}

int cmd_sweep(const CLI::App& cmd, Options& opt) {
    apply_config(cmd, opt);
    const Problem prob = load_or_reference(opt);
    SweepSpec spec;
    spec.axis = parse_axis(opt.axis);
    spec.values = parse_doubles(opt.values);
    spec.base = make_run_config(opt);
    spec.trials = opt.trials;
    spec.base_seed = opt.seed;
    const auto rows = sweep(prob.scenario, prob.graph, spec);
    const std::string dir = opt.out_path.empty() ? "." : opt.out_path;
    for (const auto& path : emit_sweep_files(dir, spec.axis, rows)) {
        std::cerr << "wrote " << path << "\n";
    }
    return 0;
}

int cmd_validate(const CLI::App& cmd, Options& opt) {
    apply_config(cmd, opt);
    const Problem prob = load_or_reference(opt);
    prob.scenario.validate();
    const auto comps = check_connected(prob.graph);
    std::cout << "scenario: " << (opt.scenario_path.empty() ? "builtin-reference" : opt.scenario_path)
              << "\n"
              << "dimension: " << prob.scenario.dimension << "\n"
              << "clusters: " << prob.scenario.cluster_count() << "\n";
    for (const auto& cl : prob.scenario.clusters)
        std::cout << "  cluster " << cl.id << ": " << cl.sensors.size() << " sensors\n";
    std::cout << "edges: " << prob.graph.edges.size() << "\n"
              << "connected: " << (comps.size() == 1 ? "yes" : "no") << "\n";
    if (comps.size() != 1) {
        for (std::size_t c = 0; c < comps.size(); ++c) {
            std::cout << "  component " << (c + 1) << ":";
            for (int i : comps[c]) std::cout << " " << i;
            std::cout << "\n";
        }
        return 1;
    }
    return 0;
}

int cmd_gamma(const CLI::App& cmd, Options& opt) {
    apply_config(cmd, opt);
    const Problem prob = load_or_reference(opt);
    const auto inc = incidence_matrix(prob.graph, 1);
    const auto gamma = select_gamma(prob.graph);
    std::cout << "alpha_max: " << inc.alpha_max << "\n";
    for (int i = 1; i <= prob.graph.m; ++i)
        std::cout << "cluster " << i << ": degree=" << prob.graph.degree(i)
                  << " gamma=" << gamma[static_cast<std::size_t>(i - 1)] << "\n";
    return 0;
}

int cmd_report(const CLI::App& cmd, Options& opt) {
    apply_config(cmd, opt);
    const Problem prob = load_or_reference(opt);
    std::ofstream file;
    std::ostream& os = open_out(file, opt);
    for (const auto& [k, v] : resolved_header(opt)) os << "# " << k << "=" << v << "\n";
    os << "variant,cluster,err_rmse,inc_rmse,trials,excluded\n";
    for (Variant var : {Variant::SCL, Variant::TCL, Variant::GS, Variant::J}) {
        RunConfig cfg = make_run_config(opt);
        cfg.variant = var;
        if (var == Variant::SCL || var == Variant::TCL) cfg.iterations = 1;
        const auto rep = monte_carlo(prob.scenario, prob.graph, cfg, opt.trials, opt.seed);
        for (std::size_t i = 0; i < rep.err_rmse.size(); ++i)
            os << to_string(var) << "," << (i + 1) << "," << rep.err_rmse[i] << "," << rep.inc_rmse
               << "," << rep.trials << "," << rep.excluded << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"clusterloc: distributed event localization over clustered sensor networks"};
    app.require_subcommand(1);

    Options opt;
    CLI::App* c_run = app.add_subcommand("run", "single trajectory, CSV iteration trace");
    CLI::App* c_sweep = app.add_subcommand("sweep", "Monte Carlo sweep over rho/sigma/iterations");
    CLI::App* c_val = app.add_subcommand("validate", "check a scenario file and its topology");
    CLI::App* c_gam = app.add_subcommand("gamma", "print the parallel variant's gamma rule");
    CLI::App* c_rep = app.add_subcommand("report", "RMSE metrics for all variants");
    for (CLI::App* c : {c_run, c_sweep, c_val, c_gam, c_rep}) add_common(c, opt);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_run->parsed()) return cmd_run(*c_run, opt);
        if (c_sweep->parsed()) return cmd_sweep(*c_sweep, opt);
        if (c_val->parsed()) return cmd_validate(*c_val, opt);
        if (c_gam->parsed()) return cmd_gamma(*c_gam, opt);
        if (c_rep->parsed()) return cmd_report(*c_rep, opt);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
