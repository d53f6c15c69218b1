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

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "oak/control/cluster_actor.hpp"
#include "oak/control/root_actor.hpp"
#include "oak/control/sim_network.hpp"
#include "oak/control/worker_actor.hpp"
#include "oak/lifecycle/node_engine.hpp"
#include "oak/scheduler/plugin.hpp"

namespace oak::sim {

struct WorkerSpec {
    std::string id;
    core::CapacityVector capacity;
    core::GeoPoint geo;
    coords::VivaldiCoordinate vivaldi = coords::VivaldiCoordinate::origin();
    std::set<std::string> virtualizations = {"container"};
};

struct ClusterSpec {
    std::string id;
    std::string scheduler = "rom_best_slack";
    std::vector<WorkerSpec> workers;
    std::vector<ClusterSpec> subclusters;
};

struct WorldSpec {
    std::vector<ClusterSpec> clusters;
    resource::TelemetryConfig telemetry;
    control::SessionConfig session;
    core::Millis drain_ms = 500;
    std::uint64_t seed = 0;
    core::RegionRegistry regions;
};

/// Root, clusters and workers wired to one simulated network.
class World {
public:
    World(WorldSpec spec, control::SimNetwork::LatencyFn latency = {}, scheduler::RttProbe probe = {},
          control::Observer* observer = nullptr)
        : spec_(std::move(spec)),
          net_(loop_, std::move(latency), spec_.seed),
          registry_(scheduler::SchedulerRegistry::with_builtins()),
          probe_(std::move(probe)),
          observer_(observer) {
        control::RootConfig rc;
        rc.session = spec_.session;
        rc.telemetry = spec_.telemetry;
        rc.drain_ms = spec_.drain_ms;
        rc.regions = spec_.regions;
        for (const auto& c : spec_.clusters) rc.clusters.push_back(c.id);
        root_ = std::make_unique<control::RootActor>("root", rc, net_, observer_);
        std::uint32_t index = 0;
        for (const auto& c : spec_.clusters) build(c, "root", index);
        net_.attach(*root_);
    }

    /// Starts every actor; workers register at time zero.
    void start() {
        root_->start();
        for (auto& [_, c] : clusters_) c->start();
        for (auto& [_, w] : workers_) w->start();
    }

    void run_for(core::Millis ms) { loop_.run_until(loop_.now() + ms); }
    void run_until(core::Millis t) { loop_.run_until(t); }

    /// Worker process dies: silent from now on.
    void crash_worker(const std::string& id) { net_.crash(id); }

    /// Worker process comes back empty and registers again.
    void restart_worker(const std::string& id) {
        net_.recover(id);
        workers_.at(id)->restart();
    }

    control::RootActor& root() { return *root_; }
    const control::RootActor& root() const { return *root_; }
    control::ClusterActor& cluster(const std::string& id) { return *clusters_.at(id); }
    control::WorkerActor& worker(const std::string& id) { return *workers_.at(id); }
    const std::map<std::string, std::unique_ptr<control::WorkerActor>>& workers() const { return workers_; }
    const std::map<std::string, std::unique_ptr<control::ClusterActor>>& clusters() const { return clusters_; }
    const std::string& cluster_of(const std::string& worker) const { return owner_.at(worker); }
    control::SimNetwork& network() { return net_; }
    control::EventLoop& loop() { return loop_; }
    core::Millis now() const { return loop_.now(); }
    const WorldSpec& spec() const { return spec_; }

private:
    void build(const ClusterSpec& c, const std::string& parent, std::uint32_t& index) {
        control::ClusterConfig cc;
        cc.parent_id = parent;
        cc.index = index++;
        cc.telemetry = spec_.telemetry;
        cc.session = spec_.session;
        cc.scheduler = c.scheduler;
        cc.seed = spec_.seed;
        for (const auto& s : c.subclusters) cc.children.push_back(s.id);
        auto actor = std::make_unique<control::ClusterActor>(c.id, cc, net_, registry_, probe_, observer_);
        net_.attach(*actor);
        clusters_.emplace(c.id, std::move(actor));
        for (const auto& w : c.workers) {
            control::WorkerConfig wc;
            wc.cluster_id = c.id;
            wc.registration.id = w.id;
            wc.registration.declared_capacity = w.capacity;
            wc.registration.geo = w.geo;
            wc.registration.vivaldi = w.vivaldi;
            wc.registration.virtualizations = w.virtualizations;
            wc.telemetry_interval_ms = spec_.telemetry.update_interval_ms;
            auto& rt = runtimes_[w.id];
            rt = std::make_unique<lifecycle::NoopRuntime>();
            auto wa = std::make_unique<control::WorkerActor>(wc, net_, *rt, observer_);
            net_.attach(*wa);
            owner_[w.id] = c.id;
            workers_.emplace(w.id, std::move(wa));
        }
        for (const auto& s : c.subclusters) build(s, c.id, index);
    }

    WorldSpec spec_;
    control::EventLoop loop_;
    control::SimNetwork net_;
    scheduler::SchedulerRegistry registry_;
    scheduler::RttProbe probe_;
    control::Observer* observer_;
    std::unique_ptr<control::RootActor> root_;
    std::map<std::string, std::unique_ptr<control::ClusterActor>> clusters_;
    std::map<std::string, std::unique_ptr<control::WorkerActor>> workers_;
    std::map<std::string, std::unique_ptr<lifecycle::NoopRuntime>> runtimes_;
    std::map<std::string, std::string> owner_;
};

}  // namespace oak::sim
