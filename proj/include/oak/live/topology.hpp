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

#include <algorithm>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "oak/control/cluster_actor.hpp"
#include "oak/control/root_actor.hpp"
#include "oak/control/socket_transport.hpp"
#include "oak/control/worker_actor.hpp"
#include "oak/lifecycle/node_engine.hpp"

namespace oak::live {

struct WorkerEntry {
    std::string id;
    std::optional<control::Endpoint> listen;  // ephemeral port when absent
    core::CapacityVector capacity;
    core::GeoPoint geo;
    std::set<std::string> virtualizations = {"container"};
};

struct ClusterEntry {
    std::string id;
    control::Endpoint listen;
    std::string scheduler = "rom_best_slack";
    std::vector<WorkerEntry> workers;
    std::vector<ClusterEntry> clusters;
};

/// A whole deployment: where every orchestrator and worker listens.
struct Topology {
    control::Endpoint root_listen{"127.0.0.1", 7000};
    std::string regions;  // region registry file, optional
    resource::TelemetryConfig telemetry;
    std::vector<ClusterEntry> clusters;
};

namespace detail {

inline void only(const nlohmann::json& j, std::initializer_list<const char*> keys, const std::string& where) {
    if (!j.is_object()) throw InvalidArgumentError(where + " must be an object");
    for (const auto& [k, _] : j.items()) {
        if (std::find_if(keys.begin(), keys.end(), [&](const char* s) { return k == s; }) == keys.end()) {
            throw InvalidArgumentError("unknown field '" + k + "' in " + where);
        }
    }
}

inline WorkerEntry parse_worker(const nlohmann::json& j) {
    only(j, {"id", "listen", "cpu", "memory", "gpu", "tpu", "bandwidth_in", "geo", "virtualizations"}, "worker");
    WorkerEntry w;
    w.id = j.at("id").get<std::string>();
    if (j.contains("listen")) w.listen = control::Endpoint::parse(j.at("listen").get<std::string>());
    w.capacity.cpu_cores = j.value("cpu", 0.0);
    w.capacity.memory_mb = j.value("memory", std::int64_t{0});
    w.capacity.gpu_units = j.value("gpu", std::int64_t{0});
    w.capacity.tpu_units = j.value("tpu", std::int64_t{0});
    w.capacity.bandwidth_in_mbps = j.value("bandwidth_in", std::int64_t{0});
    if (j.contains("geo")) {
        const auto g = j.at("geo").get<std::vector<double>>();
        if (g.size() != 2) throw InvalidArgumentError("worker geo must be [lat, lon]");
        w.geo = core::GeoPoint(g[0], g[1]);
    }
    if (j.contains("virtualizations")) w.virtualizations = j.at("virtualizations").get<std::set<std::string>>();
    return w;
}

inline ClusterEntry parse_cluster(const nlohmann::json& j) {
    only(j, {"id", "listen", "scheduler", "workers", "clusters"}, "cluster");
    ClusterEntry c;
    c.id = j.at("id").get<std::string>();
    c.listen = control::Endpoint::parse(j.at("listen").get<std::string>());
    c.scheduler = j.value("scheduler", c.scheduler);
    for (const auto& w : j.value("workers", nlohmann::json::array())) c.workers.push_back(parse_worker(w));
    for (const auto& s : j.value("clusters", nlohmann::json::array())) c.clusters.push_back(parse_cluster(s));
    return c;
}

}  // namespace detail

inline Topology parse_topology(const nlohmann::json& doc) {
    detail::only(doc, {"root", "telemetry", "clusters"}, "topology");
    Topology t;
    try {
        if (doc.contains("root")) {
            const auto& r = doc.at("root");
            detail::only(r, {"listen", "regions"}, "root");
            if (r.contains("listen")) t.root_listen = control::Endpoint::parse(r.at("listen").get<std::string>());
            t.regions = r.value("regions", std::string());
        }
        if (doc.contains("telemetry")) {
            const auto& m = doc.at("telemetry");
            detail::only(m, {"interval_ms", "staleness_ms", "delta_threshold"}, "telemetry");
            t.telemetry.update_interval_ms = m.value("interval_ms", t.telemetry.update_interval_ms);
            t.telemetry.staleness_timeout_ms = m.value("staleness_ms", t.telemetry.staleness_timeout_ms);
            t.telemetry.delta_threshold = m.value("delta_threshold", t.telemetry.delta_threshold);
            t.telemetry.validate();
        }
        for (const auto& c : doc.value("clusters", nlohmann::json::array())) t.clusters.push_back(detail::parse_cluster(c));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgumentError(std::string("topology: ") + e.what());
    }
    std::set<std::string> ids = {"root"};
    std::function<void(const ClusterEntry&)> check = [&](const ClusterEntry& c) {
        if (!ids.insert(c.id).second) throw InvalidArgumentError("duplicate id '" + c.id + "'");
        for (const auto& w : c.workers) {
            if (!ids.insert(w.id).second) throw InvalidArgumentError("duplicate id '" + w.id + "'");
        }
        for (const auto& s : c.clusters) check(s);
    };
    for (const auto& c : t.clusters) check(c);
    return t;
}

inline Topology load_topology(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgumentError("cannot open " + path);
    try {
        return parse_topology(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgumentError(path + ": " + e.what());
    }
}

/// Indented tree of the deployment.
inline std::string describe(const Topology& t) {
    std::ostringstream os;
    os << "root  " << t.root_listen.str() << "\n";
    std::function<void(const ClusterEntry&, const std::string&)> walk = [&](const ClusterEntry& c, const std::string& pad) {
        os << pad << "cluster " << c.id << "  " << c.listen.str() << "  scheduler " << c.scheduler << "\n";
        for (const auto& w : c.workers) {
            os << pad << "  worker " << w.id << "  cpu " << w.capacity.cpu_cores << "  memory " << w.capacity.memory_mb << " MB";
            if (w.capacity.gpu_units) os << "  gpu " << w.capacity.gpu_units;
            os << "  at " << w.geo.latitude() << "," << w.geo.longitude() << "\n";
        }
        for (const auto& s : c.clusters) walk(s, pad + "  ");
    };
    for (const auto& c : t.clusters) walk(c, "  ");
    return os.str();
}

enum class TransportMode { memory, socket };

inline TransportMode parse_mode(const std::string& s) {
    if (s.empty() || s == "socket") return TransportMode::socket;
    if (s == "memory") return TransportMode::memory;
    throw InvalidArgumentError("transport must be memory or socket, got '" + s + "'");
}

/// Every actor of a topology inside this process. In memory mode one
/// transport hosts all of them and only the root port is opened; in socket
/// mode each actor listens on its own address and traffic goes over TCP.
class Deployment {
public:
    Deployment(Topology topo, TransportMode mode) : topo_(std::move(topo)), mode_(mode) {
        registry_ = scheduler::SchedulerRegistry::with_builtins();
        control::RootConfig rc;
        rc.telemetry = topo_.telemetry;
        rc.session.heartbeat_interval_ms = topo_.telemetry.update_interval_ms;
        if (!topo_.regions.empty()) rc.regions = core::RegionRegistry::load(topo_.regions);
        for (const auto& c : topo_.clusters) rc.clusters.push_back(c.id);
        auto& root_t = transport_for(topo_.root_listen);
        root_ = std::make_unique<control::RootActor>("root", rc, root_t, &control::null_observer());
        root_t.attach(*root_);
        std::uint32_t index = 0;
        for (const auto& c : topo_.clusters) build(c, "root", topo_.root_listen, index);
    }

    void start() {
        root_->start();
        for (auto& c : clusters_) c->start();
        for (auto& w : workers_) w->start();
    }

    /// One round over every transport.
    void poll(core::Millis max_wait) {
        for (auto& t : transports_) t->poll_once(transports_.size() == 1 ? max_wait : 0);
        if (transports_.size() > 1 && max_wait > 0) transports_.front()->poll_once(1);
    }

    bool run_until(const std::function<bool()>& done, core::Millis timeout) {
        const auto deadline = transports_.front()->now() + timeout;
        while (!done() && transports_.front()->now() < deadline) poll(5);
        return done();
    }

    control::RootActor& root() { return *root_; }
    control::ClusterActor& cluster(const std::string& id) {
        for (auto& c : clusters_) {
            if (c->id() == id) return *c;
        }
        throw InvalidArgumentError("no cluster " + id);
    }
    control::WorkerActor& worker(const std::string& id) {
        for (auto& w : workers_) {
            if (w->id() == id) return *w;
        }
        throw InvalidArgumentError("no worker " + id);
    }
    std::size_t transports() const { return transports_.size(); }
    core::Millis now() const { return transports_.front()->now(); }
    control::Endpoint root_endpoint() const {
        return control::Endpoint{topo_.root_listen.host, transports_.front()->port()};
    }

private:
    control::SocketTransport& transport_for(const control::Endpoint& e) {
        if (mode_ == TransportMode::memory && !transports_.empty()) return *transports_.front();
        transports_.push_back(std::make_unique<control::SocketTransport>(e.port, e.host));
        return *transports_.back();
    }

    void build(const ClusterEntry& c, const std::string& parent, const control::Endpoint& parent_at, std::uint32_t& index) {
        control::ClusterConfig cc;
        cc.parent_id = parent;
        cc.index = index++;
        cc.telemetry = topo_.telemetry;
        cc.session.heartbeat_interval_ms = topo_.telemetry.update_interval_ms;
        cc.scheduler = c.scheduler;
        for (const auto& s : c.clusters) cc.children.push_back(s.id);
        auto& t = transport_for(c.listen);
        t.add_route(parent, parent_at);
        auto actor = std::make_unique<control::ClusterActor>(c.id, cc, t, registry_, scheduler::RttProbe{});
        t.attach(*actor);
        clusters_.push_back(std::move(actor));
        for (const auto& w : c.workers) {
            control::WorkerConfig wc;
            wc.cluster_id = c.id;
            wc.registration.id = w.id;
            wc.registration.declared_capacity = w.capacity;
            wc.registration.geo = w.geo;
            wc.registration.virtualizations = w.virtualizations;
            wc.telemetry_interval_ms = topo_.telemetry.update_interval_ms;
            auto& wt = transport_for(w.listen.value_or(control::Endpoint{c.listen.host, 0}));
            wt.add_route(c.id, c.listen);
            runtimes_.push_back(std::make_unique<lifecycle::ThreadRuntime>());
            auto wa = std::make_unique<control::WorkerActor>(wc, wt, *runtimes_.back());
            wt.attach(*wa);
            workers_.push_back(std::move(wa));
        }
        for (const auto& s : c.clusters) build(s, c.id, c.listen, index);
    }

    Topology topo_;
    TransportMode mode_;
    scheduler::SchedulerRegistry registry_;
    std::vector<std::unique_ptr<control::SocketTransport>> transports_;
    std::unique_ptr<control::RootActor> root_;
    std::vector<std::unique_ptr<control::ClusterActor>> clusters_;
    std::vector<std::unique_ptr<lifecycle::ThreadRuntime>> runtimes_;
    std::vector<std::unique_ptr<control::WorkerActor>> workers_;
};

}  // namespace oak::live
