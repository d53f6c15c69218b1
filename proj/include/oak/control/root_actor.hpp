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

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oak/control/actor_base.hpp"
#include "oak/control/cluster_actor.hpp"
#include "oak/control/codec.hpp"
#include "oak/control/session.hpp"
#include "oak/lifecycle/instance.hpp"
#include "oak/overlay/service.hpp"
#include "oak/resource/manager.hpp"
#include "oak/scheduler/prioritize.hpp"

namespace oak::control {

struct RootConfig {
    SessionConfig session;
    resource::TelemetryConfig telemetry;  // staleness of cluster aggregates
    core::Millis drain_ms = 500;          // old instance keeps serving this long after a migration
    std::vector<std::string> clusters;    // watched from the start; others join on first push
    core::RegionRegistry regions;
};

/// Root orchestrator: ranks clusters from their aggregates, delegates each
/// task down the priority list, owns the service registry and drives
/// migration, replication and recovery from cluster loss.
class RootActor final : public ActorBase {
public:
    using GroupDone = std::function<void(const nlohmann::json& results)>;
    using JobDone = std::function<void(const ScheduleRecord&)>;

    RootActor(std::string id, RootConfig config, Transport& transport, Observer* observer = nullptr)
        : ActorBase(std::move(id), transport, observer),
          config_(std::move(config)),
          aggregates_(id_, 0, config_.telemetry),
          instances_(id_),
          session_(transport, id_, config_.session) {
        session_.on_down([this](const std::string& c) { on_cluster_down(c); });
        session_.on_up([this](const std::string& c) { send(MessageKind::Alarm, c, {{"reason", "resync"}}); });
    }

    void start() override {
        for (const auto& c : config_.clusters) join(c);
        arm_tick();
    }

    void on_message(const ControlMessage& m) override {
        if (!accept(m)) return;
        if (session_.on_message(m)) return;
        switch (m.kind) {
            case MessageKind::AggregatePush: on_aggregate(m); break;
            case MessageKind::ScheduleRequest:
                if (m.body.value("escalate", false)) {
                    on_escalation(m);
                } else if (m.body.contains("sla")) {
                    on_client_deploy(m);
                }
                break;
            case MessageKind::ResolveQuery: on_resolve_query(m); break;
            case MessageKind::Alarm: on_alarm(m); break;
            case MessageKind::InstanceStatus:
                if (m.body.contains("sync")) {
                    on_sync(m);
                } else if (m.body.contains("query")) {
                    reply(m, MessageKind::InstanceStatus, status_report());
                }
                break;
            default: break;
        }
    }

    /// Schedules every task of `service`, targets of service-to-service
    /// constraints first. `done` gets one result object per task.
    void submit(const core::ServiceDescriptor& service, GroupDone done = {}) {
        const auto gid = ++group_counter_;
        auto& g = groups_[gid];
        g.done = std::move(done);
        g.results = nlohmann::json::array();
        std::set<std::int64_t> in_service, ordered;
        for (const auto& t : service.tasks) in_service.insert(t.microservice_id);
        std::vector<const core::TaskRequirements*> remaining;
        for (const auto& t : service.tasks) remaining.push_back(&t);
        while (!remaining.empty()) {
            std::vector<const core::TaskRequirements*> next;
            for (const auto* t : remaining) {
                bool ready = true;
                for (const auto& c : t->s2s_constraints) {
                    if (in_service.count(c.target_microservice_id) && !ordered.count(c.target_microservice_id)) ready = false;
                }
                if (ready) {
                    g.queue.push_back({service.service_id, *t});
                    ordered.insert(t->microservice_id);
                } else {
                    next.push_back(t);
                }
            }
            if (next.size() == remaining.size()) {
                for (const auto* t : next) {
                    g.results.push_back({{"microservice_id", t->microservice_id},
                                         {"ok", false},
                                         {"reason", "dependency cycle among service-to-service targets"}});
                }
                break;
            }
            remaining = std::move(next);
        }
        advance_group(gid);
    }

    /// Moves a running instance off its worker. The old instance is stopped
    /// only after the new one runs and the bindings were pushed.
    void migrate(const lifecycle::InstanceId& old_id, JobDone done = {}) {
        if (!instances_.contains(old_id) || instances_.at(old_id).state != lifecycle::InstanceState::running ||
            migrating_.count(old_id)) {
            if (done) done(ScheduleRecord{old_id, "", 0, "migration", false, {}, now(), now(), 0, "", {}, {}, "not running"});
            return;
        }
        migrating_.insert(old_id);
        const auto& old = instances_.at(old_id);
        const auto& meta = meta_.at(old_id);
        auto& fresh = instances_.create(old.service_id, old.microservice_id, old.capacity, old_id);
        Job j;
        j.kind = "migration";
        j.instance_id = fresh.instance_id;
        j.service_id = old.service_id;
        j.service_name = meta.service_name;
        j.task = meta.task;
        j.excluded_workers = {old.placement->worker_id};
        j.replaces = old_id;
        j.done = std::move(done);
        start_job(std::move(j));
    }

    /// Adds `count` instances of the microservice backing `instance_id`; each is
    /// scheduled on its own and the original is left alone.
    void replicate(const lifecycle::InstanceId& instance_id, int count, GroupDone done = {}) {
        const auto gid = ++group_counter_;
        auto& g = groups_[gid];
        g.done = std::move(done);
        g.results = nlohmann::json::array();
        const auto& meta = meta_.at(instance_id);
        const auto& inst = instances_.at(instance_id);
        for (int i = 0; i < count; ++i) g.queue.push_back({inst.service_id, meta.task, "replica"});
        advance_group(gid);
    }

    const overlay::ServiceRegistry& registry() const { return registry_; }
    const lifecycle::InstanceTable& instances() const { return instances_; }
    bool cluster_down(const std::string& c) const { return session_.is_down(c); }
    const std::set<std::string>& clusters() const { return clusters_; }
    std::size_t jobs_in_flight() const { return jobs_.size(); }

    std::vector<lifecycle::InstanceId> running_of(const std::string& service_name) const {
        std::vector<lifecycle::InstanceId> out;
        for (const auto& [iid, inst] : instances_.all()) {
            if (inst.state == lifecycle::InstanceState::running && meta_.count(iid) && meta_.at(iid).service_name == service_name) {
                out.push_back(iid);
            }
        }
        return out;
    }

    nlohmann::json status_report() const {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& [iid, inst] : instances_.all()) {
            nlohmann::json e = {{"instance_id", iid},
                                {"service_id", inst.service_id},
                                {"microservice_id", inst.microservice_id},
                                {"state", lifecycle::state_name(inst.state)}};
            if (inst.placement) e["placement"] = codec::encode(*inst.placement);
            if (inst.instance_ip) e["instance_ip"] = inst.instance_ip->str();
            list.push_back(std::move(e));
        }
        nlohmann::json cl = nlohmann::json::array();
        for (const auto& c : clusters_) cl.push_back({{"cluster_id", c}, {"down", session_.is_down(c)}});
        return {{"instances", list}, {"clusters", cl}};
    }

private:
    struct Meta {
        std::string service_name;
        core::TaskRequirements task;
        core::GeoPoint geo;
        coords::VivaldiCoordinate vivaldi = coords::VivaldiCoordinate::origin();
    };

    struct Job {
        std::string kind = "initial";
        lifecycle::InstanceId instance_id;
        std::string service_id;
        std::string service_name;
        core::TaskRequirements task;
        std::set<core::WorkerId> excluded_workers;
        std::set<core::ClusterId> excluded_clusters;
        core::Millis requested_at = 0;
        core::Millis deadline = 0;
        std::vector<core::ClusterId> order;
        std::size_t next = 0;
        lifecycle::InstanceId replaces;
        JobDone done;
    };

    struct Pending {
        std::string service_id;
        core::TaskRequirements task;
        std::string kind = "initial";
    };

    struct Group {
        std::deque<Pending> queue;
        nlohmann::json results;
        GroupDone done;
    };

    void join(const std::string& cluster) {
        if (clusters_.insert(cluster).second) session_.watch(cluster);
    }

    void arm_tick() {
        transport().set_timer(id(), config_.session.heartbeat_interval_ms, [this] {
            session_.check();
            arm_tick();
        });
    }

    // --- groups and jobs ---------------------------------------------------

    void advance_group(std::uint64_t gid) {
        auto& g = groups_.at(gid);
        if (g.queue.empty()) {
            auto done = std::move(g.done);
            auto results = std::move(g.results);
            groups_.erase(gid);
            if (done) done(results);
            return;
        }
        auto p = std::move(g.queue.front());
        g.queue.pop_front();
        auto& inst = instances_.create(p.service_id, p.task.microservice_id, p.task.capacity);
        Job j;
        j.kind = p.kind;
        j.instance_id = inst.instance_id;
        j.service_id = p.service_id;
        j.service_name = overlay_name(p.service_id, p.task);
        j.task = p.task;
        j.done = [this, gid](const ScheduleRecord& r) {
            auto& g2 = groups_.at(gid);
            nlohmann::json e = {{"microservice_id", r.microservice_id},
                                {"instance_id", r.instance_id},
                                {"ok", r.ok}};
            if (r.ok) {
                e["worker_id"] = r.placement->worker_id;
                e["cluster_path"] = r.placement->cluster_path;
                e["instance_ip"] = r.instance_ip;
            } else {
                e["reason"] = r.reason;
            }
            g2.results.push_back(std::move(e));
            advance_group(gid);
        };
        start_job(std::move(j));
    }

    void start_job(Job j) {
        j.requested_at = now();
        j.deadline = now() + j.task.convergence_time_ms;
        meta_[j.instance_id] = Meta{j.service_name, j.task, {}, coords::VivaldiCoordinate::origin()};
        {
            Stopwatch sw;
            std::vector<std::pair<core::ClusterId, core::AggregateStats>> kids;
            for (auto& [cid, stats] : aggregates_.live_child_aggregates(now())) {
                if (!j.excluded_clusters.count(cid) && !session_.is_down(cid)) kids.emplace_back(cid, std::move(stats));
            }
            try {
                for (const auto& p : scheduler::root_prioritize(j.task, kids)) {
                    if (p.feasible) j.order.push_back(p.cluster_id);
                }
            } catch (const NoFeasibleClusterError&) {
            }
            observer().root_calc(j.instance_id, sw.micros());
        }
        const auto key = ++job_counter_;
        jobs_.emplace(key, std::move(j));
        try_next(key);
    }

    scheduler::PlacedMap placed_targets(const Job& j) const {
        scheduler::PlacedMap out;
        for (const auto& c : j.task.s2s_constraints) {
            for (const auto& iid : instances_.running_of(j.service_id, c.target_microservice_id)) {
                const auto& m = meta_.at(iid);
                out[c.target_microservice_id] = {*instances_.at(iid).placement, m.geo, m.vivaldi};
                break;
            }
        }
        return out;
    }

    void try_next(std::uint64_t key) {
        auto& j = jobs_.at(key);
        if (j.next >= j.order.size()) return job_failed(key, j.order.empty() ? "no feasible cluster" : "all clusters declined");
        if (now() > j.deadline) return job_failed(key, "deadline exceeded");
        const auto cluster = j.order[j.next++];
        nlohmann::json body = {{"instance_id", j.instance_id},
                               {"service_id", j.service_id},
                               {"service_name", j.service_name},
                               {"task", codec::encode(j.task)},
                               {"placed", detail::encode_placed(placed_targets(j))},
                               {"excluded_workers", j.excluded_workers},
                               {"excluded_clusters", j.excluded_clusters},
                               {"deadline", j.deadline}};
        session_.rpc(
            make(MessageKind::ScheduleRequest, cluster, std::move(body)),
            [this, key](const ControlMessage& r) {
                if (r.body.value("ok", false)) return job_succeeded(key, r.body);
                try_next(key);
            },
            [this, key](const PeerDownError&) { try_next(key); });
    }

    ScheduleRecord record_of(const Job& j, bool ok) const {
        ScheduleRecord r;
        r.instance_id = j.instance_id;
        r.service_id = j.service_id;
        r.microservice_id = j.task.microservice_id;
        r.kind = j.kind;
        r.ok = ok;
        r.requested_at = j.requested_at;
        r.decided_at = now();
        r.clusters_tried = static_cast<int>(j.next);
        return r;
    }

    void job_succeeded(std::uint64_t key, const nlohmann::json& body) {
        auto j = std::move(jobs_.at(key));
        jobs_.erase(key);
        const auto placement = codec::placement(body.at("placement"));
        const auto ip = overlay::Address::parse(body.at("instance_ip").get<std::string>());
        instances_.apply(j.instance_id, lifecycle::LifecycleEvent::placed, placement);
        instances_.apply(j.instance_id, lifecycle::LifecycleEvent::started);
        instances_.at(j.instance_id).instance_ip = ip;
        auto& meta = meta_.at(j.instance_id);
        meta.geo = codec::geo(body.at("geo"));
        meta.vivaldi = codec::vivaldi(body.at("vivaldi"));
        observer().instance_state(now(), id(), j.instance_id, lifecycle::InstanceState::running);
        registry_.add_instance(j.service_name, {ip, placement.worker_id, meta.vivaldi, j.instance_id});
        if (j.kind == "migration") retire(j.replaces);
        push_update(j.service_name);
        auto r = record_of(j, true);
        r.placement = placement;
        r.instance_ip = ip.str();
        r.worker_geo = meta.geo;
        r.worker_vivaldi = meta.vivaldi;
        observer().scheduled(r);
        if (j.done) j.done(r);
    }

    void job_failed(std::uint64_t key, const std::string& reason) {
        auto j = std::move(jobs_.at(key));
        jobs_.erase(key);
        instances_.apply(j.instance_id, lifecycle::LifecycleEvent::errored);
        observer().instance_state(now(), id(), j.instance_id, lifecycle::InstanceState::failed);
        if (j.kind == "migration") migrating_.erase(j.replaces);
        auto r = record_of(j, false);
        r.reason = reason;
        observer().scheduled(r);
        if (j.done) j.done(r);
    }

    /// Second half of a migration: drop the old binding, then stop the old
    /// instance after the drain period.
    void retire(const lifecycle::InstanceId& old_id) {
        migrating_.erase(old_id);
        auto& old = instances_.at(old_id);
        if (old.state != lifecycle::InstanceState::running) return;
        registry_.remove_instance(meta_.at(old_id).service_name, *old.instance_ip);
        const auto path = old.placement->cluster_path;
        send(MessageKind::Deploy, path.front(),
             {{"instance_id", old_id}, {"action", "stop"}, {"drain_ms", config_.drain_ms}, {"path", path}});
    }

    void push_update(const std::string& service_name) {
        auto subs = subscribers_.find(service_name);
        if (subs == subscribers_.end()) return;
        const auto* rec = registry_.find(service_name);
        const nlohmann::json body = {{"service", service_name},
                                     {"bindings", codec::encode(registry_.bindings(service_name))},
                                     {"version", rec->version}};
        for (const auto& c : subs->second) send(MessageKind::TableUpdate, c, body);
    }

    // --- inbound -----------------------------------------------------------

    void on_client_deploy(const ControlMessage& m) {
        core::ServiceDescriptor desc;
        try {
            desc = core::parse_sla(m.body.at("sla"), &config_.regions);
        } catch (const Error& e) {
            reply(m, MessageKind::ScheduleResponse, {{"ok", false}, {"reason", e.what()}});
            return;
        }
        submit(desc, [this, m](const nlohmann::json& results) {
            bool ok = true;
            for (const auto& r : results) ok = ok && r.value("ok", false);
            reply(m, MessageKind::ScheduleResponse, {{"ok", ok}, {"service_id", m.body["sla"].value("service_id", "")}, {"results", results}});
        });
    }

    void on_aggregate(const ControlMessage& m) {
        const auto cluster = m.body.at("cluster_id").get<std::string>();
        join(cluster);
        if (m.body.at("stats").is_null()) {
            aggregates_.remove_child(cluster);
        } else {
            aggregates_.push_child_aggregate(cluster, codec::aggregate_stats(m.body.at("stats")),
                                             m.body.at("seq").get<std::uint64_t>(), now());
        }
        for (const auto& e : m.body.value("events", nlohmann::json::array())) on_event(e);
    }

    void on_event(const nlohmann::json& e) {
        const auto kind = e.value("event", std::string());
        if (kind == "failed") {
            fail_instance(e.at("instance_id").get<std::string>());
        } else if (kind == "terminated") {
            const auto iid = e.at("instance_id").get<std::string>();
            if (instances_.contains(iid) && instances_.at(iid).state == lifecycle::InstanceState::running) {
                instances_.apply(iid, lifecycle::LifecycleEvent::stopped);
                observer().instance_state(now(), id(), iid, lifecycle::InstanceState::terminated);
            }
        } else if (kind == "rescheduled") {
            adopt_replacement(e);
        } else if (kind == "cluster_down") {
            on_cluster_down(e.at("cluster").get<std::string>());
        }
    }

    /// Marks a live instance failed and withdraws its binding. Returns false
    /// if it was already terminal or unknown.
    bool fail_instance(const lifecycle::InstanceId& iid) {
        if (!instances_.contains(iid)) return false;
        auto& inst = instances_.at(iid);
        if (lifecycle::is_terminal(inst.state)) return false;
        const auto ip = inst.instance_ip;
        instances_.apply(iid, lifecycle::LifecycleEvent::errored);
        migrating_.erase(iid);
        observer().instance_state(now(), id(), iid, lifecycle::InstanceState::failed);
        const auto& name = meta_.at(iid).service_name;
        if (ip && registry_.remove_instance(name, *ip)) push_update(name);
        return true;
    }

    void adopt_replacement(const nlohmann::json& e) {
        fail_instance(e.at("replaces").get<std::string>());
        lifecycle::ServiceInstance inst;
        inst.instance_id = e.at("instance_id").get<std::string>();
        inst.service_id = e.at("service_id").get<std::string>();
        const auto task = codec::task(e.at("task"));
        inst.microservice_id = task.microservice_id;
        inst.capacity = task.capacity;
        instances_.adopt(inst);
        const auto placement = codec::placement(e.at("placement"));
        const auto ip = overlay::Address::parse(e.at("instance_ip").get<std::string>());
        instances_.apply(inst.instance_id, lifecycle::LifecycleEvent::placed, placement);
        instances_.apply(inst.instance_id, lifecycle::LifecycleEvent::started);
        instances_.at(inst.instance_id).instance_ip = ip;
        const auto name = e.at("service_name").get<std::string>();
        meta_[inst.instance_id] = Meta{name, task, codec::geo(e.at("geo")), codec::vivaldi(e.at("vivaldi"))};
        observer().instance_state(now(), id(), inst.instance_id, lifecycle::InstanceState::running);
        registry_.add_instance(name, {ip, placement.worker_id, meta_[inst.instance_id].vivaldi, inst.instance_id});
        push_update(name);
        ScheduleRecord r;
        r.instance_id = inst.instance_id;
        r.service_id = inst.service_id;
        r.microservice_id = inst.microservice_id;
        r.kind = "local_reschedule";
        r.ok = true;
        r.placement = placement;
        r.requested_at = r.decided_at = now();
        r.instance_ip = ip.str();
        r.worker_geo = meta_[inst.instance_id].geo;
        r.worker_vivaldi = meta_[inst.instance_id].vivaldi;
        observer().scheduled(r);
    }

    void on_escalation(const ControlMessage& m) {
        const auto replaces = m.body.at("replaces").get<std::string>();
        fail_instance(replaces);
        const auto task = codec::task(m.body.at("task"));
        auto& inst = instances_.create(m.body.at("service_id").get<std::string>(), task.microservice_id, task.capacity);
        Job j;
        j.kind = "reschedule";
        j.instance_id = inst.instance_id;
        j.service_id = inst.service_id;
        j.service_name = m.body.at("service_name").get<std::string>();
        j.task = task;
        j.excluded_workers = m.body.value("excluded_workers", std::set<std::string>{});
        j.replaces = replaces;
        const auto origin = m.body.value("origin", std::string());
        j.done = [this, replaces, origin](const ScheduleRecord& r) {
            observer().rescheduled(now(), id(), replaces, r.instance_id, false, r.ok);
        };
        start_job(std::move(j));
    }

    void on_cluster_down(const std::string& cluster) {
        aggregates_.remove_child(cluster);
        std::vector<lifecycle::InstanceId> lost;
        for (const auto& [iid, inst] : instances_.all()) {
            if (lifecycle::is_terminal(inst.state) || !inst.placement) continue;
            const auto& path = inst.placement->cluster_path;
            if (std::find(path.begin(), path.end(), cluster) != path.end()) lost.push_back(iid);
        }
        for (const auto& iid : lost) {
            if (!fail_instance(iid)) continue;
            const auto& old = instances_.at(iid);
            const auto& meta = meta_.at(iid);
            auto& fresh = instances_.create(old.service_id, old.microservice_id, old.capacity);
            Job j;
            j.kind = "reschedule";
            j.instance_id = fresh.instance_id;
            j.service_id = old.service_id;
            j.service_name = meta.service_name;
            j.task = meta.task;
            j.excluded_clusters = {cluster};
            j.replaces = iid;
            j.done = [this, iid](const ScheduleRecord& r) {
                observer().rescheduled(now(), id(), iid, r.instance_id, false, r.ok);
            };
            start_job(std::move(j));
        }
    }

    void on_sync(const ControlMessage& m) {
        // A cluster came back: anything it still runs that was replaced meanwhile is stopped.
        const auto cluster = m.body.value("cluster_id", m.sender);
        for (const auto& s : m.body.at("sync")) {
            const auto iid = s.at("instance_id").get<std::string>();
            if (instances_.contains(iid) && !lifecycle::is_terminal(instances_.at(iid).state)) continue;
            send(MessageKind::Deploy, cluster,
                 {{"instance_id", iid}, {"action", "stop"}, {"drain_ms", 0}, {"path", std::vector<std::string>{cluster}}});
        }
    }

    void on_alarm(const ControlMessage& m) {
        const auto iid = m.body.value("instance_id", std::string());
        if (!iid.empty()) migrate(iid);
    }

    void on_resolve_query(const ControlMessage& m) {
        overlay::Address a;
        try {
            a = overlay::Address::parse(m.body.at("query").get<std::string>());
        } catch (const Error&) {
            reply(m, MessageKind::ResolveReply, {{"found", false}});
            return;
        }
        const auto r = registry_.lookup(a);
        if (!r) {
            reply(m, MessageKind::ResolveReply, {{"found", false}});
            return;
        }
        subscribers_[r->service_id].insert(m.sender);
        reply(m, MessageKind::ResolveReply, {{"found", true}, {"reply", codec::encode(*r)}});
    }

    RootConfig config_;
    resource::ClusterResourceManager aggregates_;
    lifecycle::InstanceTable instances_;
    SessionTable session_;
    overlay::ServiceRegistry registry_;
    std::map<lifecycle::InstanceId, Meta> meta_;
    std::map<std::uint64_t, Job> jobs_;
    std::uint64_t job_counter_ = 0;
    std::map<std::uint64_t, Group> groups_;
    std::uint64_t group_counter_ = 0;
    std::set<lifecycle::InstanceId> migrating_;
    std::map<std::string, std::set<std::string>> subscribers_;
    std::set<std::string> clusters_;
};

}  // namespace oak::control
