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


// Structured-text forms of the domain types carried in message bodies.

#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "oak/coords/vivaldi.hpp"
#include "oak/core/model.hpp"
#include "oak/core/placement.hpp"
#include "oak/core/sla.hpp"
#include "oak/errors.hpp"
#include "oak/lifecycle/node_engine.hpp"
#include "oak/overlay/address.hpp"
#include "oak/resource/manager.hpp"
#include "oak/overlay/service.hpp"

namespace oak::control::codec {

using nlohmann::json;

inline json encode(const core::CapacityVector& c) {
    return {{"cpu", c.cpu_cores}, {"memory", c.memory_mb}, {"gpu", c.gpu_units}, {"tpu", c.tpu_units},
            {"bandwidth_in", c.bandwidth_in_mbps}};
}

inline core::CapacityVector capacity(const json& j) {
    return {j.value("cpu", 0.0), j.value("memory", std::int64_t{0}), j.value("gpu", std::int64_t{0}),
            j.value("tpu", std::int64_t{0}), j.value("bandwidth_in", std::int64_t{0})};
}

inline json encode(const coords::VivaldiCoordinate& v) {
    return {{"position", v.position}, {"height", v.height}, {"error", v.error_estimate}};
}

inline coords::VivaldiCoordinate vivaldi(const json& j) {
    return {j.at("position").get<std::vector<double>>(), j.value("height", 0.0), j.value("error", 1.0)};
}

inline json encode(const core::GeoPoint& p) { return json::array({p.latitude(), p.longitude()}); }
inline core::GeoPoint geo(const json& j) { return core::GeoPoint(j.at(0).get<double>(), j.at(1).get<double>()); }

inline json encode(const core::GeoZone& z) {
    json out = json::array();
    for (const auto& v : z.vertices()) out.push_back(encode(v));
    return out;
}

inline core::GeoZone zone(const json& j) {
    std::vector<core::GeoPoint> pts;
    for (const auto& p : j) pts.push_back(geo(p));
    return core::GeoZone::from_vertices(pts);
}

inline json encode(const core::AggregateStats& s) {
    json dims = json::object();
    for (auto d : core::kAggregatedDims) dims[std::string(core::dim_name(d))] = {s[d].sum, s[d].mean, s[d].std};
    return {{"dims", dims},
            {"worker_count", s.worker_count},
            {"virtualizations", s.supported_virtualizations},
            {"geo_zone", encode(s.geo_zone)}};
}

inline core::AggregateStats aggregate_stats(const json& j) {
    core::AggregateStats s;
    for (auto d : core::kAggregatedDims) {
        const auto& t = j.at("dims").at(std::string(core::dim_name(d)));
        s[d] = {t.at(0).get<double>(), t.at(1).get<double>(), t.at(2).get<double>()};
    }
    s.worker_count = j.at("worker_count").get<std::int64_t>();
    s.supported_virtualizations = j.at("virtualizations").get<std::set<std::string>>();
    s.geo_zone = zone(j.at("geo_zone"));
    return s;
}

inline json encode(const core::TaskRequirements& t) {
    json j = {{"microservice_id", t.microservice_id},
              {"name", t.name},
              {"capacity", encode(t.capacity)},
              {"rigidness", t.rigidness},
              {"convergence_time", t.convergence_time_ms},
              {"virtualization", t.virtualization},
              {"workload", {{"kind", core::workload_kind_name(t.workload.kind)}, {"parameters", t.workload.parameters}}}};
    if (t.latency_ms) j["latency"] = *t.latency_ms;
    if (t.area) j["area"] = {{"name", t.area->name}, {"zone", encode(t.area->zone)}};
    if (t.location) j["location"] = encode(*t.location);
    if (t.threshold) j["threshold"] = *t.threshold;
    json s2s = json::array();
    for (const auto& c : t.s2s_constraints) {
        s2s.push_back({{"target", c.target_microservice_id}, {"geo", c.geo_threshold_km}, {"lat", c.latency_threshold_ms}});
    }
    json s2u = json::array();
    for (const auto& c : t.s2u_constraints) {
        s2u.push_back({{"user", c.user_endpoint},
                       {"geo_target", encode(c.geo_target)},
                       {"geo", c.geo_threshold_km},
                       {"lat", c.latency_threshold_ms},
                       {"probes", c.probe_count}});
    }
    j["s2s"] = s2s;
    j["s2u"] = s2u;
    return j;
}

inline core::TaskRequirements task(const json& j) {
    core::TaskRequirements t;
    t.microservice_id = j.at("microservice_id").get<std::int64_t>();
    t.name = j.value("name", std::string());
    t.capacity = capacity(j.at("capacity"));
    t.rigidness = j.value("rigidness", 0.5);
    t.convergence_time_ms = j.value("convergence_time", std::int64_t{5000});
    t.virtualization = j.value("virtualization", std::string("container"));
    if (j.contains("workload")) {
        t.workload.kind = core::parse_workload_kind(j["workload"].value("kind", std::string("sleep")));
        t.workload.parameters = j["workload"].value("parameters", std::map<std::string, std::string>{});
    }
    if (j.contains("latency")) t.latency_ms = j["latency"].get<double>();
    if (j.contains("area")) t.area = core::Region{j["area"].at("name").get<std::string>(), zone(j["area"].at("zone"))};
    if (j.contains("location")) t.location = geo(j["location"]);
    if (j.contains("threshold")) t.threshold = j["threshold"].get<double>();
    for (const auto& c : j.value("s2s", json::array())) {
        t.s2s_constraints.push_back({c.at("target").get<std::int64_t>(), c.at("geo").get<double>(), c.at("lat").get<double>()});
    }
    for (const auto& c : j.value("s2u", json::array())) {
        t.s2u_constraints.push_back({c.at("user").get<std::string>(), geo(c.at("geo_target")), c.at("geo").get<double>(),
                                     c.at("lat").get<double>(), c.value("probes", std::int64_t{5})});
    }
    return t;
}

inline json encode(const core::Placement& p) {
    return {{"worker_id", p.worker_id}, {"cluster_path", p.cluster_path}, {"decided_at", p.decided_at}};
}

inline core::Placement placement(const json& j) {
    return {j.at("worker_id").get<std::string>(), j.at("cluster_path").get<std::vector<std::string>>(),
            j.value("decided_at", core::Millis{0})};
}

inline json encode(const overlay::Binding& b) {
    return {{"instance_ip", b.instance_ip.str()},
            {"node_endpoint", b.node_endpoint},
            {"vivaldi", encode(b.vivaldi)},
            {"instance_id", b.instance_id}};
}

inline overlay::Binding binding(const json& j) {
    return {overlay::Address::parse(j.at("instance_ip").get<std::string>()), j.at("node_endpoint").get<std::string>(),
            vivaldi(j.at("vivaldi")), j.value("instance_id", std::string())};
}

inline json encode(const std::vector<overlay::Binding>& bs) {
    json out = json::array();
    for (const auto& b : bs) out.push_back(encode(b));
    return out;
}

inline std::vector<overlay::Binding> bindings(const json& j) {
    std::vector<overlay::Binding> out;
    for (const auto& b : j) out.push_back(binding(b));
    return out;
}

inline json encode(const overlay::ResolveReply& r) {
    return {{"query", r.query.str()},
            {"service_id", r.service_id},
            {"policy", overlay::policy_name(r.policy)},
            {"bindings", encode(r.bindings)},
            {"version", r.version}};
}

inline overlay::ResolveReply resolve_reply(const json& j) {
    return {overlay::Address::parse(j.at("query").get<std::string>()), j.at("service_id").get<std::string>(),
            overlay::parse_policy(j.at("policy").get<std::string>()), bindings(j.at("bindings")),
            j.at("version").get<std::uint64_t>()};
}

inline json encode(const overlay::WorkerSubnet& s) { return {{"cluster_index", s.cluster_index}, {"index", s.index}}; }

inline overlay::WorkerSubnet subnet(const json& j) {
    return {j.at("cluster_index").get<std::uint32_t>(), j.at("index").get<std::uint32_t>()};
}

inline json encode(const lifecycle::DeployCommand& d) {
    json j = {{"instance_id", d.instance_id},
              {"service_id", d.service_id},
              {"service_name", d.service_name},
              {"microservice_id", d.microservice_id},
              {"workload", {{"kind", core::workload_kind_name(d.workload.kind)}, {"parameters", d.workload.parameters}}},
              {"capacity", encode(d.capacity)}};
    j["subnet_hint"] = d.subnet_hint ? encode(*d.subnet_hint) : json();
    return j;
}

inline lifecycle::DeployCommand deploy(const json& j) {
    lifecycle::DeployCommand d;
    d.instance_id = j.at("instance_id").get<std::string>();
    d.service_id = j.value("service_id", std::string());
    d.service_name = j.value("service_name", std::string());
    d.microservice_id = j.at("microservice_id").get<std::int64_t>();
    d.workload.kind = core::parse_workload_kind(j.at("workload").value("kind", std::string("sleep")));
    d.workload.parameters = j.at("workload").value("parameters", std::map<std::string, std::string>{});
    d.capacity = capacity(j.at("capacity"));
    if (j.contains("subnet_hint") && !j["subnet_hint"].is_null()) d.subnet_hint = subnet(j["subnet_hint"]);
    return d;
}

inline json encode(const resource::RegistrationRecord& r) {
    json j = {{"id", r.id},
              {"capacity", encode(r.declared_capacity)},
              {"virtualizations", r.virtualizations},
              {"geo", encode(r.geo)},
              {"registered_at", r.registered_at},
              {"vivaldi", encode(r.vivaldi)}};
    j["subnet"] = r.assigned_subnet ? encode(*r.assigned_subnet) : json();
    return j;
}

inline resource::RegistrationRecord registration(const json& j) {
    resource::RegistrationRecord r;
    r.id = j.at("id").get<std::string>();
    r.declared_capacity = capacity(j.at("capacity"));
    r.virtualizations = j.at("virtualizations").get<std::set<std::string>>();
    r.geo = geo(j.at("geo"));
    r.registered_at = j.value("registered_at", core::Millis{0});
    r.vivaldi = vivaldi(j.at("vivaldi"));
    if (j.contains("subnet") && !j["subnet"].is_null()) r.assigned_subnet = subnet(j["subnet"]);
    return r;
}

inline json encode(const resource::TelemetryReport& t) {
    return {{"worker_id", t.worker_id}, {"used", encode(t.used)}, {"vivaldi", encode(t.vivaldi)}, {"seq", t.seq}};
}

inline resource::TelemetryReport telemetry(const json& j) {
    return {j.at("worker_id").get<std::string>(), capacity(j.at("used")), vivaldi(j.at("vivaldi")),
            j.at("seq").get<std::uint64_t>()};
}

}  // namespace oak::control::codec
