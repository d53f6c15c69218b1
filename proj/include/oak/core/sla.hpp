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

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oak/core/capacity.hpp"
#include "oak/core/geo.hpp"
#include "oak/errors.hpp"

namespace oak::core {

/// Runtime tags a worker can host.
inline bool known_virtualization(const std::string& tag) {
    return tag == "container" || tag == "unikernel" || tag == "mock";
}

struct Region {
    std::string name;
    GeoZone zone;

    friend bool operator==(const Region&, const Region&) = default;
};

/// Named polygons that SLA "area" and "location" strings resolve against.
class RegionRegistry {
public:
    void add(Region region) { regions_[region.name] = std::move(region); }

    const Region& at(const std::string& name) const {
        auto it = regions_.find(name);
        if (it == regions_.end()) throw UnknownRegionError(name);
        return it->second;
    }
    bool contains(const std::string& name) const { return regions_.count(name) != 0; }
    std::size_t size() const { return regions_.size(); }

    /// Document form: {"regions": {"<name>": [[lat, lon], ...], ...}}.
    static RegionRegistry from_json(const nlohmann::json& doc) {
        RegionRegistry reg;
        if (!doc.is_object() || !doc.contains("regions") || !doc.at("regions").is_object()) {
            throw SlaParseError("region registry needs a 'regions' object");
        }
        for (const auto& [name, verts] : doc.at("regions").items()) {
            std::vector<GeoPoint> pts;
            for (const auto& v : verts) {
                if (!v.is_array() || v.size() != 2) throw SlaParseError("region vertex must be [lat, lon]");
                pts.emplace_back(v[0].get<double>(), v[1].get<double>());
            }
            if (pts.empty()) throw SlaParseError("region '" + name + "' has no vertices");
            reg.add(Region{name, GeoZone::from_vertices(pts)});
        }
        return reg;
    }

    static RegionRegistry load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw SlaParseError("cannot open region registry " + path);
        try {
            return from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw SlaParseError(path + ": " + e.what());
        }
    }

private:
    std::map<std::string, Region> regions_;
};

struct S2SConstraint {
    std::int64_t target_microservice_id = 0;
    double geo_threshold_km = 0.0;
    double latency_threshold_ms = 0.0;
};

struct S2UConstraint {
    std::string user_endpoint;
    GeoPoint geo_target;
    double geo_threshold_km = 0.0;
    double latency_threshold_ms = 0.0;
    std::int64_t probe_count = 5;
};

struct MockWorkload {
    enum class Kind { sleep, echo, cpu_burn };
    Kind kind = Kind::sleep;
    std::map<std::string, std::string> parameters;

    friend bool operator==(const MockWorkload&, const MockWorkload&) = default;
};

inline std::string workload_kind_name(MockWorkload::Kind k) {
    switch (k) {
        case MockWorkload::Kind::sleep: return "sleep";
        case MockWorkload::Kind::echo: return "echo";
        case MockWorkload::Kind::cpu_burn: return "cpu_burn";
    }
    return "sleep";
}

inline MockWorkload::Kind parse_workload_kind(const std::string& s) {
    if (s == "sleep") return MockWorkload::Kind::sleep;
    if (s == "echo") return MockWorkload::Kind::echo;
    if (s == "cpu_burn") return MockWorkload::Kind::cpu_burn;
    throw InvalidArgumentError("unknown workload kind '" + s + "'");
}

/// Requirements of one microservice.
struct TaskRequirements {
    std::int64_t microservice_id = 0;
    std::string name;  // overlay service name, e.g. "serviceB"
    CapacityVector capacity;
    std::optional<double> latency_ms;
    std::optional<Region> area;
    std::optional<GeoPoint> location;
    std::optional<double> threshold;  // km around `location`; default geo threshold
    double rigidness = 0.5;
    std::int64_t convergence_time_ms = 5000;
    std::string virtualization = "container";
    std::vector<S2SConstraint> s2s_constraints;
    std::vector<S2UConstraint> s2u_constraints;
    MockWorkload workload;

    /// Consecutive violation reports that trigger a migration.
    int migration_trigger() const {
        return std::max(1, static_cast<int>(std::ceil((1.0 - rigidness) * 10.0 - 1e-9)));
    }
};

struct ServiceDescriptor {
    std::string service_id;
    std::vector<TaskRequirements> tasks;
};

inline void validate(const TaskRequirements& t) {
    if (!known_virtualization(t.virtualization)) {
        throw SlaParseError("unknown virtualization '" + t.virtualization + "'");
    }
    if (t.convergence_time_ms <= 0) throw SlaParseError("convergence_time must be positive");
    if (!(t.rigidness >= 0.0 && t.rigidness <= 1.0)) throw SlaParseError("rigidness must be in [0,1]");
    if (!t.capacity.non_negative()) throw SlaParseError("negative capacity requirement");
    if (t.latency_ms && !(*t.latency_ms > 0.0)) throw SlaParseError("latency must be positive");
    for (const auto& c : t.s2s_constraints) {
        if (!(c.geo_threshold_km > 0.0) || !(c.latency_threshold_ms > 0.0)) {
            throw SlaParseError("s2s thresholds must be positive");
        }
    }
    for (const auto& c : t.s2u_constraints) {
        if (!(c.geo_threshold_km > 0.0) || !(c.latency_threshold_ms > 0.0)) {
            throw SlaParseError("s2u thresholds must be positive");
        }
        if (c.probe_count < 3) throw SlaParseError("s2u probe_count must be at least 3");
    }
}

inline void validate(const ServiceDescriptor& s) {
    if (s.tasks.empty()) throw SlaParseError("service '" + s.service_id + "' has no tasks");
    std::set<std::int64_t> ids;
    for (const auto& t : s.tasks) {
        if (!ids.insert(t.microservice_id).second) {
            throw SlaParseError("duplicate microservice_id " + std::to_string(t.microservice_id));
        }
        validate(t);
    }
}

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.count(key)) throw SlaParseError("unknown field '" + key + "' in " + where);
    }
}

template <typename T>
T number_field(const nlohmann::json& v, const std::string& key, bool integral) {
    if (!v.is_number()) throw SlaParseError("field '" + key + "' must be a number");
    if (integral && !v.is_number_integer()) throw SlaParseError("field '" + key + "' must be an integer");
    return v.get<T>();
}

/// "lat,lon" or a registered region name (resolved to its centroid).
inline GeoPoint parse_location(const std::string& s, const RegionRegistry* regions) {
    const auto comma = s.find(',');
    if (comma != std::string::npos) {
        try {
            return GeoPoint(std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1)));
        } catch (const std::invalid_argument&) {
            throw SlaParseError("bad location '" + s + "'");
        }
    }
    if (!regions) throw SlaParseError("location '" + s + "' needs a region registry");
    return regions->at(s).zone.centroid();
}

}  // namespace detail

/// Parses an SLA document. Field names follow the service requirement
/// descriptor: constraints -> [{microservice_id, properties: [...]}].
/// Every properties entry is merged; a key may appear once per microservice.
inline ServiceDescriptor parse_sla(const nlohmann::json& doc, const RegionRegistry* regions = nullptr) {
    using nlohmann::json;
    using detail::number_field;
    if (!doc.is_object()) throw SlaParseError("SLA must be an object");
    detail::reject_unknown(doc, {"service_id", "constraints"}, "SLA");
    ServiceDescriptor svc;
    svc.service_id = doc.value("service_id", std::string("service"));
    if (!doc.contains("constraints") || !doc.at("constraints").is_array()) {
        throw SlaParseError("SLA needs a 'constraints' list");
    }
    for (const auto& c : doc.at("constraints")) {
        if (!c.is_object()) throw SlaParseError("constraint must be an object");
        detail::reject_unknown(c, {"microservice_id", "name", "properties", "workload"}, "constraint");
        TaskRequirements t;
        if (!c.contains("microservice_id")) throw SlaParseError("constraint without microservice_id");
        t.microservice_id = number_field<std::int64_t>(c.at("microservice_id"), "microservice_id", true);
        t.name = c.value("name", svc.service_id + "-" + std::to_string(t.microservice_id));

        json merged = json::object();
        if (c.contains("properties")) {
            if (!c.at("properties").is_array()) throw SlaParseError("'properties' must be a list");
            for (const auto& p : c.at("properties")) {
                if (!p.is_object()) throw SlaParseError("property entry must be an object");
                for (const auto& [k, v] : p.items()) {
                    if (merged.contains(k)) throw SlaParseError("property '" + k + "' given twice");
                    merged[k] = v;
                }
            }
        }
        detail::reject_unknown(merged,
                               {"memory", "vcpus", "vgpus", "vtpus", "bandwidth_in", "latency", "area", "location",
                                "threshold", "rigidness", "convergence_time", "virtualization", "s2s", "s2u"},
                               "properties of microservice " + std::to_string(t.microservice_id));
        if (merged.contains("memory")) t.capacity.memory_mb = number_field<std::int64_t>(merged["memory"], "memory", true);
        if (merged.contains("vcpus")) t.capacity.cpu_cores = number_field<double>(merged["vcpus"], "vcpus", false);
        if (merged.contains("vgpus")) t.capacity.gpu_units = number_field<std::int64_t>(merged["vgpus"], "vgpus", true);
        if (merged.contains("vtpus")) t.capacity.tpu_units = number_field<std::int64_t>(merged["vtpus"], "vtpus", true);
        if (merged.contains("bandwidth_in")) {
            t.capacity.bandwidth_in_mbps = number_field<std::int64_t>(merged["bandwidth_in"], "bandwidth_in", true);
        }
        if (merged.contains("latency")) t.latency_ms = number_field<double>(merged["latency"], "latency", false);
        if (merged.contains("area")) {
            const auto name = merged["area"].get<std::string>();
            if (!regions) throw SlaParseError("area '" + name + "' needs a region registry");
            t.area = regions->at(name);
        }
        if (merged.contains("location")) {
            if (!merged["location"].is_string()) throw SlaParseError("'location' must be a string");
            t.location = detail::parse_location(merged["location"].get<std::string>(), regions);
        }
        if (merged.contains("threshold")) t.threshold = number_field<double>(merged["threshold"], "threshold", false);
        if (merged.contains("rigidness")) t.rigidness = number_field<double>(merged["rigidness"], "rigidness", false);
        if (merged.contains("convergence_time")) {
            t.convergence_time_ms = number_field<std::int64_t>(merged["convergence_time"], "convergence_time", true);
        }
        if (merged.contains("virtualization")) t.virtualization = merged["virtualization"].get<std::string>();

        // Per-constraint thresholds fall back to the microservice-level ones.
        const auto geo_default = t.threshold;
        const auto lat_default = t.latency_ms;
        if (merged.contains("s2s")) {
            for (const auto& q : merged["s2s"]) {
                detail::reject_unknown(q, {"target", "geo_threshold", "latency_threshold"}, "s2s constraint");
                S2SConstraint s;
                s.target_microservice_id = number_field<std::int64_t>(q.at("target"), "target", true);
                s.geo_threshold_km = q.contains("geo_threshold")
                                         ? number_field<double>(q["geo_threshold"], "geo_threshold", false)
                                         : geo_default.value_or(0.0);
                s.latency_threshold_ms = q.contains("latency_threshold")
                                             ? number_field<double>(q["latency_threshold"], "latency_threshold", false)
                                             : lat_default.value_or(0.0);
                t.s2s_constraints.push_back(s);
            }
        }
        if (merged.contains("s2u")) {
            for (const auto& q : merged["s2u"]) {
                detail::reject_unknown(q,
                                       {"user_endpoint", "geo_target", "geo_threshold", "latency_threshold", "probe_count"},
                                       "s2u constraint");
                S2UConstraint s;
                s.user_endpoint = q.at("user_endpoint").get<std::string>();
                s.geo_target = detail::parse_location(q.at("geo_target").get<std::string>(), regions);
                s.geo_threshold_km = q.contains("geo_threshold")
                                         ? number_field<double>(q["geo_threshold"], "geo_threshold", false)
                                         : geo_default.value_or(0.0);
                s.latency_threshold_ms = q.contains("latency_threshold")
                                             ? number_field<double>(q["latency_threshold"], "latency_threshold", false)
                                             : lat_default.value_or(0.0);
                if (q.contains("probe_count")) s.probe_count = number_field<std::int64_t>(q["probe_count"], "probe_count", true);
                t.s2u_constraints.push_back(s);
            }
        }
        if (c.contains("workload")) {
            const auto& w = c.at("workload");
            detail::reject_unknown(w, {"kind", "parameters"}, "workload");
            t.workload.kind = parse_workload_kind(w.at("kind").get<std::string>());
            if (w.contains("parameters")) {
                for (const auto& [k, v] : w.at("parameters").items()) {
                    t.workload.parameters[k] = v.is_string() ? v.get<std::string>() : v.dump();
                }
            }
        }
        svc.tasks.push_back(std::move(t));
    }
    validate(svc);
    return svc;
}

inline ServiceDescriptor load_sla(const std::string& path, const RegionRegistry* regions = nullptr) {
    std::ifstream in(path);
    if (!in) throw SlaParseError("cannot open SLA file " + path);
    try {
        return parse_sla(nlohmann::json::parse(in), regions);
    } catch (const nlohmann::json::exception& e) {
        throw SlaParseError(path + ": " + e.what());
    }
}

}  // namespace oak::core
