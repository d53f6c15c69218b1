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
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oak/control/actor_base.hpp"
#include "oak/control/broker.hpp"
#include "oak/control/codec.hpp"
#include "oak/control/session.hpp"
#include "oak/lifecycle/instance.hpp"
#include "oak/resource/manager.hpp"
#include "oak/scheduler/plugin.hpp"
#include "oak/scheduler/prioritize.hpp"

namespace oak::control {

struct ClusterConfig {
    std::string parent_id = "root";
    std::uint32_t index = 0;  // second octet of the cluster's instance addresses
    resource::TelemetryConfig telemetry;
    SessionConfig session;
    std::string scheduler = "rom_best_slack";
    std::vector<std::string> children;
    std::uint64_t seed = 0;
    int max_local_attempts = 3;
};

namespace detail {

inline nlohmann::json encode_placed(const scheduler::PlacedMap& placed) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [ms, p] : placed) {
        out.push_back({{"microservice_id", ms},
                       {"placement", codec::encode(p.placement)},
                       {"geo", codec::encode(p.geo)},
                       {"vivaldi", codec::encode(p.vivaldi)}});
    }
    return out;
}

inline scheduler::PlacedMap decode_placed(const nlohmann::json& j) {
    scheduler::PlacedMap out;
    for (const auto& p : j) {
        out[p.at("microservice_id").get<std::int64_t>()] = {codec::placement(p.at("placement")), codec::geo(p.at("geo")),
                                                            codec::vivaldi(p.at("vivaldi"))};
    }
    return out;
}

}  // namespace detail

/// Cluster orchestrator. Places tasks on its own workers with the configured
/// plugin, forwards to sub-clusters when that fails, detects silent workers
/// and reschedules their instances locally before escalating.
class ClusterActor final : public ActorBase {
public:
    ClusterActor(std::string id, ClusterConfig config, Transport& transport, const scheduler::SchedulerRegistry& registry,
                 scheduler::RttProbe probe = {}, Observer* observer = nullptr)
        : ActorBase(std::move(id), transport, observer),
          config_(std::move(config)),
          resources_(id_, config_.index, config_.telemetry),
          instances_(id_),
          session_(transport, id_, config_.session),
          plugin_(&registry.get(config_.scheduler)) {
        context_.probe = std::move(probe);
        context_.rng.seed(config_.seed ^ stable_hash(id_));
        session_.on_down([this](const std::string& peer) { on_peer_down(peer); });
    }

    void start() override {
        for (const auto& c : config_.children) session_.watch(c);
        arm_tick();
    }

    void on_message(const ControlMessage& m) override {
        if (!accept(m)) return;
        if (session_.on_message(m)) return;
        switch (m.kind) {
            case MessageKind::RegisterWorker: on_register(m); break;
            case MessageKind::Telemetry:
                if (broker_.is_open(m.sender + "/telemetry")) broker_.publish(m.sender + "/telemetry", m);
                break;
            case MessageKind::AggregatePush: on_child_aggregate(m); break;
            case MessageKind::ScheduleRequest: on_schedule_request(m); break;
            case MessageKind::Deploy: on_parent_deploy(m); break;
            case MessageKind::InstanceStatus: on_instance_status(m); break;
            case MessageKind::ResolveQuery: on_resolve_query(m); break;
            case MessageKind::ResolveReply: on_resolve_reply(m); break;
            case MessageKind::TableUpdate: on_table_update(m); break;
            case MessageKind::Alarm: on_alarm(m); break;
            default: break;
        }
    }

    const resource::ClusterResourceManager& resources() const { return resources_; }
    const lifecycle::InstanceTable& instances() const { return instances_; }
    const Broker& broker() const { return broker_; }
    std::size_t hosted() const { return hosted_.size(); }
    bool hosts(const lifecycle::InstanceId& id) const { return hosted_.count(id) != 0; }
    std::optional<core::WorkerId> worker_of(const lifecycle::InstanceId& id) const {
        auto it = hosted_.find(id);
        if (it == hosted_.end()) return std::nullopt;
        return it->second.worker;
    }

private:
    struct Hosted {
        std::string service_id;
        std::string service_name;
        core::TaskRequirements task;
        core::WorkerId worker;
        bool alarmed = false;
    };

    struct Attempt {
        bool local_reschedule = false;
        ControlMessage request;  // the ScheduleRequest being answered, if any
        lifecycle::InstanceId instance_id;
        std::string service_id;
        std::string service_name;
        core::TaskRequirements task;
        scheduler::PlacedMap placed;
        std::set<core::WorkerId> excluded_workers;
        std::set<core::ClusterId> excluded_clusters;
        core::Millis deadline = 0;
        std::optional<std::vector<core::ClusterId>> child_order;
        std::size_t next_child = 0;
        int local_attempts = 0;
        lifecycle::InstanceId replaces;
        core::WorkerId failed_worker;
    };

    // --- periodic work -----------------------------------------------------

    void arm_tick() {
        transport().set_timer(id(), config_.telemetry.update_interval_ms, [this] {
            tick();
            arm_tick();
        });
    }

    void tick() {
        handle_stale();
        session_.check();
        // With nothing live below, the push is only a heartbeat.
        nlohmann::json stats = nullptr;
        try {
            stats = codec::encode(resources_.collect_aggregate(now()));
        } catch (const EmptyAggregateError&) {
        }
        auto m = make(MessageKind::AggregatePush, config_.parent_id, {});
        m.body = {{"cluster_id", id()}, {"stats", std::move(stats)}, {"seq", m.seq}, {"events", events_}};
        events_ = nlohmann::json::array();
        transport().send(std::move(m));
    }

    void arm_staleness(const core::WorkerId& w) {
        if (!staleness_armed_.insert(w).second) return;
        const auto due = resources_.snapshot(w).last_update + config_.telemetry.staleness_timeout_ms + 1;
        transport().set_timer(id(), std::max<core::Millis>(1, due - now()), [this, w] {
            staleness_armed_.erase(w);
            if (!resources_.is_registered(w) || resources_.is_unavailable(w)) return;
            if (resources_.is_live(w, now())) {
                arm_staleness(w);
            } else {
                handle_stale();
            }
        });
    }

    void handle_stale() {
        const auto failed = resources_.mark_stale_and_fail(now(), instances_);
        for (const auto& iid : failed) instance_failed(iid, true);
    }

    /// Bookkeeping for an instance whose worker is gone; starts its local reschedule.
    void instance_failed(const lifecycle::InstanceId& iid, bool reschedule) {
        observer().instance_state(now(), id(), iid, lifecycle::InstanceState::failed);
        events_.push_back({{"event", "failed"}, {"instance_id", iid}});
        auto it = hosted_.find(iid);
        if (it == hosted_.end()) return;
        Hosted h = it->second;
        hosted_.erase(it);
        if (!reschedule) return;
        const auto& old = instances_.at(iid);
        auto& fresh = instances_.create(h.service_id, h.task.microservice_id, h.task.capacity);
        Attempt a;
        a.local_reschedule = true;
        a.instance_id = fresh.instance_id;
        a.service_id = h.service_id;
        a.service_name = h.service_name;
        a.task = h.task;
        a.excluded_workers = {old.last_worker};
        a.deadline = now() + h.task.convergence_time_ms;
        a.replaces = iid;
        a.failed_worker = old.last_worker;
        begin(std::move(a));
    }

    // --- worker side -------------------------------------------------------

    void on_register(const ControlMessage& m) {
        auto rec = codec::registration(m.body);
        rec.registered_at = now();
        overlay::WorkerSubnet subnet;
        try {
            subnet = resources_.register_worker(rec);
        } catch (const DuplicateIdError&) {
            // The worker restarted before it went stale: what it hosted is gone.
            for (const auto& iid : resources_.fail_worker(rec.id, instances_)) instance_failed(iid, true);
            subnet = resources_.register_worker(rec);
        } catch (const Error& e) {
            reply(m, MessageKind::RegisterWorker, {{"error", e.what()}});
            return;
        }
        broker_.close_worker(rec.id);
        broker_.open_worker(rec.id);
        broker_.subscribe(rec.id + "/telemetry", [this](const ControlMessage& t) { on_telemetry(t); });
        reply(m, MessageKind::RegisterWorker, {{"subnet", codec::encode(subnet)}});
        arm_staleness(rec.id);
    }

    void on_telemetry(const ControlMessage& m) {
        const auto report = codec::telemetry(m.body);
        const bool was_unavailable = resources_.is_unavailable(report.worker_id);
        try {
            resources_.push_telemetry(report, now());
        } catch (const Error&) {
            return;
        }
        arm_staleness(report.worker_id);
        for (const auto& s : m.body.value("instances", nlohmann::json::array())) {
            const auto iid = s.at("instance_id").get<std::string>();
            auto it = hosted_.find(iid);
            if (it == hosted_.end()) {
                // Replaced while the worker was out of reach.
                if (was_unavailable || !instances_.contains(iid) || lifecycle::is_terminal(instances_.at(iid).state)) {
                    send(MessageKind::Deploy, report.worker_id, {{"instance_id", iid}, {"action", "stop"}, {"drain_ms", 0}});
                }
                continue;
            }
            auto& inst = instances_.at(iid);
            inst.violation_streak = s.value("sla_violation", false) ? inst.violation_streak + 1 : 0;
            if (!it->second.alarmed && inst.violation_streak >= it->second.task.migration_trigger()) {
                it->second.alarmed = true;
                send(MessageKind::Alarm, config_.parent_id,
                     {{"instance_id", iid}, {"streak", inst.violation_streak}, {"service_id", it->second.service_id}});
            }
        }
    }

    void on_instance_status(const ControlMessage& m) {
        // Unsolicited statuses: a stop completed, or a child relays one.
        const auto iid = m.body.at("instance_id").get<std::string>();
        if (m.body.value("state", std::string()) != "terminated") return;
        auto it = hosted_.find(iid);
        if (it == hosted_.end()) return;
        auto& inst = instances_.at(iid);
        if (inst.state == lifecycle::InstanceState::running) {
            instances_.apply(iid, lifecycle::LifecycleEvent::stopped);
            observer().instance_state(now(), id(), iid, lifecycle::InstanceState::terminated);
        }
        resources_.release(it->second.worker, it->second.task.capacity);
        hosted_.erase(it);
        events_.push_back({{"event", "terminated"}, {"instance_id", iid}});
    }

    // --- scheduling --------------------------------------------------------

    void on_schedule_request(const ControlMessage& m) {
        if (m.body.value("escalate", false)) {
            // A sub-cluster gave up; only the root may act on it.
            auto up = m.body;
            send(MessageKind::ScheduleRequest, config_.parent_id, std::move(up));
            return;
        }
        Attempt a;
        a.request = m;
        a.instance_id = m.body.at("instance_id").get<std::string>();
        a.service_id = m.body.value("service_id", std::string());
        a.service_name = m.body.value("service_name", a.service_id);
        a.task = codec::task(m.body.at("task"));
        a.placed = detail::decode_placed(m.body.value("placed", nlohmann::json::array()));
        a.excluded_workers = m.body.value("excluded_workers", std::set<std::string>{});
        a.excluded_clusters = m.body.value("excluded_clusters", std::set<std::string>{});
        a.deadline = m.body.value("deadline", now() + a.task.convergence_time_ms);
        begin(std::move(a));
    }

    void begin(Attempt a) {
        const auto key = ++attempt_counter_;
        attempts_.emplace(key, std::move(a));
        run_local(key);
    }

    void run_local(std::uint64_t key) {
        auto& a = attempts_.at(key);
        if (now() > a.deadline) return conclude_failure(key, "deadline exceeded");
        std::optional<core::WorkerId> pick;
        {
            Stopwatch sw;
            auto snaps = resources_.live_snapshots(now());
            std::erase_if(snaps, [&](const core::WorkerSnapshot& w) { return a.excluded_workers.count(w.worker_id) != 0; });
            context_.placed = a.placed;
            try {
                pick = (*plugin_)(snaps, a.task, context_);
            } catch (const NoFeasibleWorkerError&) {
            } catch (const DependencyUnplacedError&) {
            }
            observer().cluster_calc(id(), a.instance_id, sw.micros());
        }
        if (!pick) return try_children(key);
        a.local_attempts++;
        resources_.reserve(*pick, a.task.capacity);
        lifecycle::DeployCommand cmd;
        cmd.instance_id = a.instance_id;
        cmd.service_id = a.service_id;
        cmd.service_name = a.service_name;
        cmd.microservice_id = a.task.microservice_id;
        cmd.workload = a.task.workload;
        cmd.capacity = a.task.capacity;
        cmd.subnet_hint = resources_.subnet_of(*pick);
        const auto worker = *pick;
        session_.rpc(
            make(MessageKind::Deploy, worker, codec::encode(cmd)),
            [this, key, worker](const ControlMessage& r) { on_deployed(key, worker, r); },
            [this, key, worker](const PeerDownError&) { deploy_failed(key, worker); });
    }

    void on_deployed(std::uint64_t key, const core::WorkerId& worker, const ControlMessage& r) {
        if (r.body.value("state", std::string()) != "running") return deploy_failed(key, worker);
        auto& a = attempts_.at(key);
        if (!instances_.contains(a.instance_id)) {
            lifecycle::ServiceInstance inst;
            inst.instance_id = a.instance_id;
            inst.service_id = a.service_id;
            inst.microservice_id = a.task.microservice_id;
            inst.capacity = a.task.capacity;
            instances_.adopt(inst);
        }
        const core::Placement p{worker, {id()}, now()};
        instances_.apply(a.instance_id, lifecycle::LifecycleEvent::placed, p);
        instances_.apply(a.instance_id, lifecycle::LifecycleEvent::started);
        const auto ip = overlay::Address::parse(r.body.at("instance_ip").get<std::string>());
        instances_.at(a.instance_id).instance_ip = ip;
        observer().instance_state(now(), id(), a.instance_id, lifecycle::InstanceState::running);
        hosted_[a.instance_id] = Hosted{a.service_id, a.service_name, a.task, worker, false};
        const auto& snap = resources_.snapshot(worker);
        nlohmann::json result = {{"ok", true},
                                 {"instance_id", a.instance_id},
                                 {"placement", codec::encode(p)},
                                 {"geo", codec::encode(snap.geo)},
                                 {"vivaldi", codec::encode(snap.vivaldi)},
                                 {"instance_ip", ip.str()},
                                 {"worker_id", worker}};
        conclude_success(key, std::move(result));
    }

    void deploy_failed(std::uint64_t key, const core::WorkerId& worker) {
        auto& a = attempts_.at(key);
        if (resources_.is_registered(worker)) resources_.release(worker, a.task.capacity);
        a.excluded_workers.insert(worker);
        if (a.local_attempts < config_.max_local_attempts) return run_local(key);
        try_children(key);
    }

    void try_children(std::uint64_t key) {
        auto& a = attempts_.at(key);
        if (!a.child_order) {
            std::vector<std::pair<core::ClusterId, core::AggregateStats>> kids;
            for (auto& [cid, stats] : resources_.live_child_aggregates(now())) {
                if (!a.excluded_clusters.count(cid) && !session_.is_down(cid)) kids.emplace_back(cid, stats);
            }
            a.child_order.emplace();
            try {
                for (const auto& p : scheduler::root_prioritize(a.task, kids)) {
                    if (p.feasible) a.child_order->push_back(p.cluster_id);
                }
            } catch (const NoFeasibleClusterError&) {
            }
        }
        if (a.next_child >= a.child_order->size()) return conclude_failure(key, "no feasible worker");
        if (now() > a.deadline) return conclude_failure(key, "deadline exceeded");
        const auto child = (*a.child_order)[a.next_child++];
        nlohmann::json body = {{"instance_id", a.instance_id},
                               {"service_id", a.service_id},
                               {"service_name", a.service_name},
                               {"task", codec::encode(a.task)},
                               {"placed", detail::encode_placed(a.placed)},
                               {"excluded_workers", a.excluded_workers},
                               {"excluded_clusters", a.excluded_clusters},
                               {"deadline", a.deadline}};
        session_.rpc(
            make(MessageKind::ScheduleRequest, child, std::move(body)),
            [this, key](const ControlMessage& r) {
                if (!r.body.value("ok", false)) return try_children(key);
                auto result = r.body;
                auto path = result["placement"]["cluster_path"].get<std::vector<std::string>>();
                path.insert(path.begin(), id());
                result["placement"]["cluster_path"] = path;
                conclude_success(key, std::move(result));
            },
            [this, key](const PeerDownError&) { try_children(key); });
    }

    void conclude_success(std::uint64_t key, nlohmann::json result) {
        auto a = std::move(attempts_.at(key));
        attempts_.erase(key);
        if (!a.local_reschedule) {
            reply(a.request, MessageKind::ScheduleResponse, std::move(result));
            return;
        }
        observer().rescheduled(now(), id(), a.replaces, a.instance_id, true, true);
        result["event"] = "rescheduled";
        result["replaces"] = a.replaces;
        result["service_id"] = a.service_id;
        result["service_name"] = a.service_name;
        result["task"] = codec::encode(a.task);
        events_.push_back(std::move(result));
    }

    void conclude_failure(std::uint64_t key, const std::string& reason) {
        auto a = std::move(attempts_.at(key));
        attempts_.erase(key);
        if (!a.local_reschedule) {
            reply(a.request, MessageKind::ScheduleResponse, {{"ok", false}, {"instance_id", a.instance_id}, {"reason", reason}});
            return;
        }
        // Nothing fits here: hand the replacement to the root.
        if (instances_.contains(a.instance_id)) instances_.apply(a.instance_id, lifecycle::LifecycleEvent::errored);
        observer().rescheduled(now(), id(), a.replaces, a.instance_id, false, false);
        send(MessageKind::ScheduleRequest, config_.parent_id,
             {{"escalate", true},
              {"replaces", a.replaces},
              {"origin", id()},
              {"service_id", a.service_id},
              {"service_name", a.service_name},
              {"task", codec::encode(a.task)},
              {"excluded_workers", std::vector<std::string>{a.failed_worker}}});
    }

    // --- children and parent ------------------------------------------------

    void on_child_aggregate(const ControlMessage& m) {
        const auto child = m.body.at("cluster_id").get<std::string>();
        if (m.body.at("stats").is_null()) {
            resources_.remove_child(child);
        } else {
            resources_.push_child_aggregate(child, codec::aggregate_stats(m.body.at("stats")),
                                            m.body.at("seq").get<std::uint64_t>(), now());
        }
        for (auto e : m.body.value("events", nlohmann::json::array())) {
            if (e.contains("placement")) {
                auto path = e["placement"]["cluster_path"].get<std::vector<std::string>>();
                path.insert(path.begin(), id());
                e["placement"]["cluster_path"] = path;
            }
            events_.push_back(std::move(e));
        }
    }

    void on_peer_down(const std::string& peer) {
        if (std::find(config_.children.begin(), config_.children.end(), peer) == config_.children.end()) return;
        resources_.remove_child(peer);
        events_.push_back({{"event", "cluster_down"}, {"cluster", peer}});
    }

    void on_parent_deploy(const ControlMessage& m) {
        if (m.body.value("action", std::string()) != "stop") return;
        const auto iid = m.body.at("instance_id").get<std::string>();
        if (auto it = hosted_.find(iid); it != hosted_.end()) {
            auto body = m.body;
            send(MessageKind::Deploy, it->second.worker, std::move(body));
            return;
        }
        const auto path = m.body.value("path", std::vector<std::string>{});
        auto self = std::find(path.begin(), path.end(), id());
        if (self != path.end() && std::next(self) != path.end()) {
            auto body = m.body;
            send(MessageKind::Deploy, *std::next(self), std::move(body));
        }
    }

    void on_alarm(const ControlMessage& m) {
        if (m.sender == config_.parent_id) {
            if (m.body.value("reason", std::string()) == "resync") send_sync(m);
            return;
        }
        auto body = m.body;
        send(MessageKind::Alarm, config_.parent_id, std::move(body));
    }

    void send_sync(const ControlMessage& request) {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& [iid, h] : hosted_) {
            list.push_back({{"instance_id", iid}, {"state", lifecycle::state_name(instances_.at(iid).state)}, {"worker_id", h.worker}});
        }
        reply(request, MessageKind::InstanceStatus, {{"sync", list}, {"cluster_id", id()}});
    }

    // --- resolution --------------------------------------------------------

    void on_resolve_query(const ControlMessage& m) {
        const auto a = overlay::Address::parse(m.body.at("query").get<std::string>());
        const bool force = m.body.value("force", false);
        if (!force) {
            if (auto it = cache_.find(a); it != cache_.end()) {
                subscribers_[it->second.service_id].insert(m.sender);
                reply(m, MessageKind::ResolveReply, {{"found", true}, {"reply", codec::encode(it->second)}});
                return;
            }
        }
        auto& waiting = waiting_[a];
        waiting.push_back({m.sender, m.seq});
        if (waiting.size() == 1 || force) {
            auto up = make(MessageKind::ResolveQuery, config_.parent_id, {{"query", a.str()}, {"force", force}});
            upstream_[up.seq] = a;
            transport().send(std::move(up));
        }
    }

    void on_resolve_reply(const ControlMessage& m) {
        auto up = upstream_.find(m.correlation);
        if (up == upstream_.end()) return;
        const auto a = up->second;
        upstream_.erase(up);
        auto w = waiting_.find(a);
        if (w == waiting_.end()) return;
        auto waiting = std::move(w->second);
        waiting_.erase(w);
        nlohmann::json body = {{"found", false}};
        if (m.body.value("found", false)) {
            const auto r = codec::resolve_reply(m.body.at("reply"));
            cache_[a] = r;
            for (const auto& [who, _] : waiting) subscribers_[r.service_id].insert(who);
            body = {{"found", true}, {"reply", codec::encode(r)}};
        }
        for (const auto& [who, seq] : waiting) send(MessageKind::ResolveReply, who, body, seq);
    }

    void on_table_update(const ControlMessage& m) {
        const auto service = m.body.at("service").get<std::string>();
        const auto version = m.body.at("version").get<std::uint64_t>();
        auto& seen = versions_[service];
        if (version <= seen) return;
        seen = version;
        const auto bindings = codec::bindings(m.body.at("bindings"));
        for (auto& [addr, r] : cache_) {
            if (r.service_id != service || r.version >= version) continue;
            if (r.policy == overlay::Policy::instance) {
                const auto pinned = r.bindings.empty() ? addr : r.bindings.front().instance_ip;
                std::vector<overlay::Binding> kept;
                for (const auto& b : bindings) {
                    if (b.instance_ip == pinned) kept.push_back(b);
                }
                r.bindings = std::move(kept);
            } else {
                r.bindings = bindings;
            }
            r.version = version;
        }
        auto subs = subscribers_.find(service);
        if (subs == subscribers_.end()) return;
        for (const auto& who : subs->second) {
            auto body = m.body;
            send(MessageKind::TableUpdate, who, std::move(body));
        }
    }

    ClusterConfig config_;
    resource::ClusterResourceManager resources_;
    lifecycle::InstanceTable instances_;
    SessionTable session_;
    Broker broker_;
    const scheduler::ClusterScheduler* plugin_;
    scheduler::ScheduleContext context_;
    std::map<lifecycle::InstanceId, Hosted> hosted_;
    std::map<std::uint64_t, Attempt> attempts_;
    std::uint64_t attempt_counter_ = 0;
    std::set<core::WorkerId> staleness_armed_;
    nlohmann::json events_ = nlohmann::json::array();
    std::map<overlay::Address, overlay::ResolveReply> cache_;
    std::map<overlay::Address, std::vector<std::pair<std::string, std::uint64_t>>> waiting_;
    std::map<std::uint64_t, overlay::Address> upstream_;
    std::map<std::string, std::set<std::string>> subscribers_;
    std::map<std::string, std::uint64_t> versions_;
};

}  // namespace oak::control
