#pragma once

// JSON scenario/topology loading. Keys:
//   dimension, event, seed,
//   clusters: [{sensors: [{position: [...], sigma}]}],
//   edges: [[i, j], ...]

#include "clusterloc/graph.hpp"
#include "clusterloc/model.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace clusterloc {

struct Problem {
    Scenario scenario;
    ClusterGraph graph;
};

inline Problem problem_from_json(const nlohmann::json& j) {
    Problem p;
    p.scenario.dimension = j.at("dimension").get<int>();
    const auto ev = j.at("event").get<std::vector<double>>();
    p.scenario.event_position = Eigen::Map<const Vec>(ev.data(), static_cast<Eigen::Index>(ev.size()));
    p.scenario.rng_seed = j.value("seed", 0ULL);
    int cid = 1;
    for (const auto& jc : j.at("clusters")) {
        Cluster cl;
        cl.id = cid++;
        int sid = 1;
        for (const auto& js : jc.at("sensors")) {
            Sensor sen;
            sen.id = sid++;
            const auto pos = js.at("position").get<std::vector<double>>();
            sen.position = Eigen::Map<const Vec>(pos.data(), static_cast<Eigen::Index>(pos.size()));
            sen.sigma = js.value("sigma", 0.0);
            cl.sensors.push_back(std::move(sen));
        }
        p.scenario.clusters.push_back(std::move(cl));
    }
    std::vector<std::pair<int, int>> edges;
    if (j.contains("edges"))
        for (const auto& je : j.at("edges"))
            edges.emplace_back(je.at(0).get<int>(), je.at(1).get<int>());
    p.graph = ClusterGraph(p.scenario.cluster_count(), std::move(edges));
    p.scenario.validate();
    return p;
}

inline Problem load_problem(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read scenario file: " + path);
    nlohmann::json j;
    f >> j;
    return problem_from_json(j);
}

inline nlohmann::json problem_to_json(const Problem& p) {
    nlohmann::json j;
    j["dimension"] = p.scenario.dimension;
    j["event"] = std::vector<double>(p.scenario.event_position.data(),
                                     p.scenario.event_position.data() + p.scenario.event_position.size());
    j["seed"] = p.scenario.rng_seed;
    j["clusters"] = nlohmann::json::array();
    for (const auto& cl : p.scenario.clusters) {
        nlohmann::json jc;
        jc["sensors"] = nlohmann::json::array();
        for (const auto& sen : cl.sensors) {
            nlohmann::json js;
            js["position"] =
                std::vector<double>(sen.position.data(), sen.position.data() + sen.position.size());
            js["sigma"] = sen.sigma;
            jc["sensors"].push_back(std::move(js));
        }
        j["clusters"].push_back(std::move(jc));
    }
    j["edges"] = nlohmann::json::array();
    for (auto [a, b] : p.graph.edges) j["edges"].push_back({a, b});
    return j;
}

/// Built-in reference problem: reference scenario plus the 1-2-3 chain.
inline Problem reference_problem(double sigma = 0.05) {
    Problem p;
    p.scenario = reference_scenario(sigma);
    p.graph = ClusterGraph(3, {{1, 2}, {2, 3}});
    return p;
}

}  // namespace clusterloc
