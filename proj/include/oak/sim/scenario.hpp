// Copyright 2026 The Oak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oak/core/capacity.hpp"
#include "oak/core/model.hpp"
#include "oak/errors.hpp"
#include "oak/resource/manager.hpp"
#include "oak/sim/planted.hpp"

namespace oak::sim {

inline constexpr int kScenarioVersion = 1;

struct Range {
    double lo = 0.0, hi = 0.0;
};

struct WorkerTemplate {
    Range cpu{4, 8};
    Range memory{4096, 8192};
    Range gpu{0, 0};
    Range tpu{0, 0};
    std::set<std::string> virtualizations = {"container"};
};

struct Topology {
    int clusters = 1;
    std::vector<int> workers_per_cluster = {10};  // one entry, or one per top-level cluster
    int tiers = 1;                                // cluster levels below the root
    int branching = 2;                            // sub-clusters per cluster above the last tier
    std::string scheduler = "rom_best_slack";

    int workers_of(std::size_t top) const {
        return workers_per_cluster.size() == 1 ? workers_per_cluster[0] : workers_per_cluster.at(top);
    }
};

struct LatencyModel {
    std::string kind = "zero";  // zero | planted
    PlantedConfig planted;
    WarmupConfig warmup;
};

struct S2uSpec {
    double latency_ms = 20.0;
    double distance_km = 120.0;
    double user_offset_km = 25.0;  // user lies this close to a worker that meets the latency bound
    int probes = 5;
};

struct Generator {
    int count = 0;
    core::Millis start_ms = 2000;
    core::Millis spacing_ms = 100;
    core::CapacityVector capacity{1, 100, 0, 0, 0};
    std::optional<S2uSpec> s2u;
};

struct TimedService {
    core::Millis at_ms = 0;
    nlohmann::json sla;
};

struct Fault {
    core::Millis at_ms = 0;
    std::string kind;  // worker_crash | worker_restart | cluster_partition
    std::string target;
    core::Millis duration_ms = 0;
};

struct Scenario {
    std::string name = "scenario";
    std::uint64_t seed = 1;
    Topology topology;
    WorkerTemplate worker_template;
    Area area;
    LatencyModel latency;
    resource::TelemetryConfig telemetry;
    Generator generator;
    std::vector<TimedService> services;
    std::vector<Fault> faults;
    core::Millis duration_ms = 0;  // 0: until the last planned event plus settle_ms
    core::Millis settle_ms = 5000;
    core::Millis sample_ms = 1000;

    void validate() const;
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw ScenarioInvalidError(where + " must be an object");
    for (const auto& [k, _] : j.items()) {
        if (std::find_if(known.begin(), known.end(), [&](const char* s) { return k == s; }) == known.end()) {
            throw ScenarioInvalidError("unknown field '" + k + "' in " + where);
        }
    }
}

template <typename T>
T get_as(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ScenarioInvalidError("field '" + std::string(key) + "' in " + where + " has the wrong type");
    }
}

inline Range range_of(const nlohmann::json& j, const char* key, Range fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_number()) return {v.get<double>(), v.get<double>()};
    if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) return {v[0].get<double>(), v[1].get<double>()};
    throw ScenarioInvalidError("'" + std::string(key) + "' in " + where + " must be a number or [lo, hi]");
}

}  // namespace detail

inline void Scenario::validate() const {
    if (topology.clusters < 1) throw ScenarioInvalidError("topology needs at least one cluster");
    if (topology.tiers < 1) throw ScenarioInvalidError("tiers must be at least 1");
    if (topology.tiers > 1 && topology.branching < 1) throw ScenarioInvalidError("branching must be at least 1");
    if (topology.workers_per_cluster.empty()) throw ScenarioInvalidError("workers_per_cluster is empty");
    if (topology.workers_per_cluster.size() != 1 &&
        topology.workers_per_cluster.size() != static_cast<std::size_t>(topology.clusters)) {
        throw ScenarioInvalidError("workers_per_cluster list must have one entry per cluster");
    }
    for (int n : topology.workers_per_cluster) {
        if (n < 0) throw ScenarioInvalidError("negative worker count");
    }
    for (const auto* r : {&worker_template.cpu, &worker_template.memory, &worker_template.gpu, &worker_template.tpu}) {
        if (r->lo < 0 || r->hi < r->lo) throw ScenarioInvalidError("worker_template ranges must satisfy 0 <= lo <= hi");
    }
    if (worker_template.virtualizations.empty()) throw ScenarioInvalidError("worker_template needs a virtualization");
    if (latency.kind != "zero" && latency.kind != "planted") {
        throw ScenarioInvalidError("unknown latency model '" + latency.kind + "'");
    }
    if (!(area.size_km > 0)) throw ScenarioInvalidError("area size must be positive");
    if (generator.count < 0 || generator.spacing_ms < 0 || generator.start_ms < 0) {
        throw ScenarioInvalidError("workload counts and times must be non-negative");
    }
    if (generator.s2u && (generator.s2u->probes < 3 || !(generator.s2u->latency_ms > 0) || !(generator.s2u->distance_km > 0))) {
        throw ScenarioInvalidError("s2u needs positive thresholds and at least 3 probes");
    }
    for (const auto& f : faults) {
        if (f.kind != "worker_crash" && f.kind != "worker_restart" && f.kind != "cluster_partition") {
            throw ScenarioInvalidError("unknown fault kind '" + f.kind + "'");
        }
        if (f.at_ms < 0) throw ScenarioInvalidError("fault time must be non-negative");
    }
    if (sample_ms <= 0) throw ScenarioInvalidError("sample_ms must be positive");
    try {
        telemetry.validate();
    } catch (const InvalidArgumentError& e) {
        throw ScenarioInvalidError(e.what());
    }
}

/// Reads a versioned scenario document. Unknown fields are rejected.
inline Scenario parse_scenario(const nlohmann::json& doc) {
    using detail::get_as;
    using detail::range_of;
    using detail::reject_unknown_keys;
    reject_unknown_keys(doc,
                        {"version", "name", "seed", "topology", "worker_template", "area", "latency_model", "telemetry",
                         "workload", "faults", "duration_ms", "settle_ms", "sample_ms"},
                        "scenario");
    if (!doc.contains("version")) throw ScenarioInvalidError("scenario has no version");
    if (get_as<int>(doc, "version", 0, "scenario") != kScenarioVersion) {
        throw ScenarioInvalidError("unsupported scenario version " + doc.at("version").dump());
    }
    Scenario s;
    s.name = get_as<std::string>(doc, "name", s.name, "scenario");
    s.seed = get_as<std::uint64_t>(doc, "seed", s.seed, "scenario");
    s.duration_ms = get_as<core::Millis>(doc, "duration_ms", 0, "scenario");
    s.settle_ms = get_as<core::Millis>(doc, "settle_ms", s.settle_ms, "scenario");
    s.sample_ms = get_as<core::Millis>(doc, "sample_ms", s.sample_ms, "scenario");

    if (doc.contains("topology")) {
        const auto& t = doc.at("topology");
        reject_unknown_keys(t, {"clusters", "workers_per_cluster", "tiers", "branching", "scheduler"}, "topology");
        s.topology.clusters = get_as<int>(t, "clusters", 1, "topology");
        s.topology.tiers = get_as<int>(t, "tiers", 1, "topology");
        s.topology.branching = get_as<int>(t, "branching", 2, "topology");
        s.topology.scheduler = get_as<std::string>(t, "scheduler", s.topology.scheduler, "topology");
        if (t.contains("workers_per_cluster")) {
            const auto& w = t.at("workers_per_cluster");
            if (w.is_number_integer()) {
                s.topology.workers_per_cluster = {w.get<int>()};
            } else {
                s.topology.workers_per_cluster = get_as<std::vector<int>>(t, "workers_per_cluster", {}, "topology");
            }
        }
    }
    if (doc.contains("worker_template")) {
        const auto& w = doc.at("worker_template");
        reject_unknown_keys(w, {"cpu", "memory", "gpu", "tpu", "virtualizations"}, "worker_template");
        auto& t = s.worker_template;
        t.cpu = range_of(w, "cpu", t.cpu, "worker_template");
        t.memory = range_of(w, "memory", t.memory, "worker_template");
        t.gpu = range_of(w, "gpu", t.gpu, "worker_template");
        t.tpu = range_of(w, "tpu", t.tpu, "worker_template");
        t.virtualizations = get_as<std::set<std::string>>(w, "virtualizations", t.virtualizations, "worker_template");
    }
    if (doc.contains("area")) {
        const auto& a = doc.at("area");
        reject_unknown_keys(a, {"center", "size_km"}, "area");
        if (a.contains("center")) {
            const auto c = get_as<std::vector<double>>(a, "center", {}, "area");
            if (c.size() != 2) throw ScenarioInvalidError("area center must be [lat, lon]");
            try {
                s.area.center = core::GeoPoint(c[0], c[1]);
            } catch (const InvalidArgumentError& e) {
                throw ScenarioInvalidError(e.what());
            }
        }
        s.area.size_km = get_as<double>(a, "size_km", s.area.size_km, "area");
    }
    if (doc.contains("latency_model")) {
        const auto& l = doc.at("latency_model");
        reject_unknown_keys(l,
                            {"kind", "km_per_ms", "height_ms", "depth_ms", "jitter", "vivaldi_rounds", "neighbours",
                             "random_peers"},
                            "latency_model");
        s.latency.kind = get_as<std::string>(l, "kind", s.latency.kind, "latency_model");
        auto& p = s.latency.planted;
        p.km_per_ms = get_as<double>(l, "km_per_ms", p.km_per_ms, "latency_model");
        const auto h = range_of(l, "height_ms", {p.height_min_ms, p.height_max_ms}, "latency_model");
        p.height_min_ms = h.lo;
        p.height_max_ms = h.hi;
        p.depth_ms = get_as<double>(l, "depth_ms", p.depth_ms, "latency_model");
        p.jitter = get_as<double>(l, "jitter", p.jitter, "latency_model");
        auto& w = s.latency.warmup;
        w.rounds = get_as<int>(l, "vivaldi_rounds", w.rounds, "latency_model");
        w.neighbours = get_as<int>(l, "neighbours", w.neighbours, "latency_model");
        w.random_peers = get_as<int>(l, "random_peers", w.random_peers, "latency_model");
        if (!(p.km_per_ms > 0) || p.height_min_ms < 0 || p.height_max_ms < p.height_min_ms || p.depth_ms < 0 ||
            p.jitter < 0 || p.jitter >= 1 || w.rounds < 0 || w.neighbours < 0 || w.random_peers < 0) {
            throw ScenarioInvalidError("latency_model values out of range");
        }
    }
    if (doc.contains("telemetry")) {
        const auto& t = doc.at("telemetry");
        reject_unknown_keys(t, {"interval_ms", "staleness_ms", "delta_threshold"}, "telemetry");
        s.telemetry.update_interval_ms = get_as<core::Millis>(t, "interval_ms", s.telemetry.update_interval_ms, "telemetry");
        s.telemetry.staleness_timeout_ms = get_as<core::Millis>(t, "staleness_ms", s.telemetry.staleness_timeout_ms, "telemetry");
        s.telemetry.delta_threshold = get_as<double>(t, "delta_threshold", s.telemetry.delta_threshold, "telemetry");
    }
    if (doc.contains("workload")) {
        const auto& w = doc.at("workload");
        reject_unknown_keys(w, {"generate", "services"}, "workload");
        if (w.contains("generate")) {
            const auto& g = w.at("generate");
            reject_unknown_keys(g, {"count", "start_ms", "spacing_ms", "cpu", "memory", "s2u"}, "workload.generate");
            auto& gen = s.generator;
            gen.count = get_as<int>(g, "count", 0, "workload.generate");
            gen.start_ms = get_as<core::Millis>(g, "start_ms", gen.start_ms, "workload.generate");
            gen.spacing_ms = get_as<core::Millis>(g, "spacing_ms", gen.spacing_ms, "workload.generate");
            gen.capacity.cpu_cores = get_as<double>(g, "cpu", gen.capacity.cpu_cores, "workload.generate");
            gen.capacity.memory_mb = get_as<std::int64_t>(g, "memory", gen.capacity.memory_mb, "workload.generate");
            if (g.contains("s2u")) {
                const auto& u = g.at("s2u");
                reject_unknown_keys(u, {"latency_ms", "distance_km", "user_offset_km", "probes"}, "workload.generate.s2u");
                S2uSpec spec;
                spec.latency_ms = get_as<double>(u, "latency_ms", spec.latency_ms, "s2u");
                spec.distance_km = get_as<double>(u, "distance_km", spec.distance_km, "s2u");
                spec.user_offset_km = get_as<double>(u, "user_offset_km", spec.user_offset_km, "s2u");
                spec.probes = get_as<int>(u, "probes", spec.probes, "s2u");
                gen.s2u = spec;
            }
        }
        if (w.contains("services")) {
            if (!w.at("services").is_array()) throw ScenarioInvalidError("workload.services must be a list");
            for (const auto& e : w.at("services")) {
                reject_unknown_keys(e, {"at_ms", "sla"}, "workload service");
                if (!e.contains("sla")) throw ScenarioInvalidError("workload service without sla");
                s.services.push_back({get_as<core::Millis>(e, "at_ms", 0, "workload service"), e.at("sla")});
            }
        }
    }
    if (doc.contains("faults")) {
        if (!doc.at("faults").is_array()) throw ScenarioInvalidError("faults must be a list");
        for (const auto& f : doc.at("faults")) {
            reject_unknown_keys(f, {"at_ms", "kind", "target", "duration_ms"}, "fault");
            Fault x;
            x.at_ms = get_as<core::Millis>(f, "at_ms", 0, "fault");
            x.kind = get_as<std::string>(f, "kind", "", "fault");
            x.target = get_as<std::string>(f, "target", "", "fault");
            x.duration_ms = get_as<core::Millis>(f, "duration_ms", 0, "fault");
            s.faults.push_back(x);
        }
    }
    s.validate();
    return s;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioInvalidError("cannot open " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioInvalidError(path + ": " + e.what());
    }
    return parse_scenario(doc);
}

}  // namespace oak::sim
