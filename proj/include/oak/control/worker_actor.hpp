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

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "oak/control/actor_base.hpp"
#include "oak/control/codec.hpp"
#include "oak/lifecycle/node_engine.hpp"
#include "oak/overlay/table.hpp"
#include "oak/resource/manager.hpp"

namespace oak::control {

struct WorkerConfig {
    std::string cluster_id;
    resource::RegistrationRecord registration;  // id, capacity, geo, virtualizations, vivaldi
    core::Millis telemetry_interval_ms = 1000;
    core::Millis resolve_timeout_ms = 3000;
};

/// Worker daemon: registers with its cluster, reports telemetry with the
/// status of every hosted instance, executes deploy/stop commands and keeps
/// the worker's conversion table.
class WorkerActor final : public ActorBase {
public:
    using ResolveCallback = std::function<void(std::optional<overlay::Binding>)>;

    WorkerActor(WorkerConfig config, Transport& transport, lifecycle::RuntimeAdapter& runtime, Observer* observer = nullptr)
        : ActorBase(config.registration.id, transport, observer),
          config_(std::move(config)),
          runtime_(&runtime),
          table_(config_.registration.vivaldi) {
        reset_engine(overlay::WorkerSubnet{});
    }

    void start() override {
        register_with_cluster();
        arm_telemetry();
    }

    /// Process restart: hosted instances are gone and the worker registers again.
    void restart() {
        for (const auto& [id, _] : std::map(engine_->instances())) engine_->stop(id);
        reset_engine(overlay::WorkerSubnet{});
        table_ = overlay::ConversionTable(config_.registration.vivaldi);
        registered_ = false;
        resolving_.clear();
        pending_queries_.clear();
        ++epoch_;
        register_with_cluster();
        arm_telemetry();
    }

    void on_message(const ControlMessage& m) override {
        if (!accept(m)) return;
        switch (m.kind) {
            case MessageKind::RegisterWorker: on_registered(m); break;
            case MessageKind::Deploy: on_deploy(m); break;
            case MessageKind::ResolveReply: on_resolve_reply(m); break;
            case MessageKind::TableUpdate: on_table_update(m); break;
            default: break;
        }
    }

    /// Resolves `a` through the conversion table, asking the cluster on a miss.
    void resolve(overlay::Address a, ResolveCallback cb) {
        if (table_.resolved(a)) {
            try {
                cb(table_.pick(a));
            } catch (const UnresolvableError&) {
                cb(std::nullopt);
            }
            return;
        }
        auto& waiting = resolving_[a];
        waiting.push_back(std::move(cb));
        if (waiting.size() == 1) query(a, false);
    }

    void set_violation(const lifecycle::InstanceId& id, bool v) {
        if (engine_->hosts(id)) engine_->set_violation(id, v);
    }

    void set_vivaldi(const coords::VivaldiCoordinate& c) {
        config_.registration.vivaldi = c;
        table_.set_local_coordinate(c);
    }

    const lifecycle::NodeEngine& engine() const { return *engine_; }
    const overlay::ConversionTable& table() const { return table_; }
    bool registered() const { return registered_; }
    std::uint64_t resolve_queries() const { return queries_; }

private:
    void reset_engine(overlay::WorkerSubnet subnet) {
        engine_ = std::make_unique<lifecycle::NodeEngine>(id(), config_.registration.declared_capacity, subnet, *runtime_);
    }

    void register_with_cluster() {
        auto rec = config_.registration;
        rec.registered_at = now();
        auto m = make(MessageKind::RegisterWorker, config_.cluster_id, codec::encode(rec));
        register_seq_ = m.seq;
        transport().send(std::move(m));
    }

    void on_registered(const ControlMessage& m) {
        if (m.correlation != register_seq_) return;
        const auto subnet = codec::subnet(m.body.at("subnet"));
        if (engine_->instances().empty()) reset_engine(subnet);
        registered_ = true;
        send_telemetry();
    }

    void arm_telemetry() {
        transport().set_timer(id(), config_.telemetry_interval_ms, [this, epoch = epoch_] {
            if (epoch != epoch_) return;
            if (registered_) send_telemetry();
            arm_telemetry();
        });
    }

    void send_telemetry() {
        nlohmann::json statuses = nlohmann::json::array();
        for (const auto& [iid, inst] : engine_->instances()) {
            statuses.push_back({{"instance_id", iid},
                                {"state", engine_->healthy(iid) ? "running" : "failed"},
                                {"sla_violation", inst.sla_violation}});
        }
        auto m = make(MessageKind::Telemetry, config_.cluster_id, {});
        resource::TelemetryReport report{id(), engine_->used(), config_.registration.vivaldi, m.seq};
        m.body = codec::encode(report);
        m.body["instances"] = std::move(statuses);
        transport().send(std::move(m));
    }

    void on_deploy(const ControlMessage& m) {
        const auto action = m.body.value("action", std::string("start"));
        if (action == "stop") {
            const auto iid = m.body.at("instance_id").get<std::string>();
            const auto drain = m.body.value("drain_ms", core::Millis{0});
            const auto requester = m.sender;
            const auto seq = m.seq;
            transport().set_timer(id(), drain, [this, iid, requester, seq] {
                auto ip = engine_->hosts(iid) ? engine_->instances().at(iid).instance_ip.str() : std::string();
                const bool stopped = engine_->stop(iid);
                if (stopped) table_.remove_local(overlay::Address::parse(ip));
                send(MessageKind::InstanceStatus, requester,
                     {{"instance_id", iid}, {"state", stopped ? "terminated" : "unknown"}, {"worker_id", id()}}, seq);
            });
            return;
        }
        const auto cmd = codec::deploy(m.body);
        try {
            const auto ip = engine_->deploy(cmd);
            table_.add_local(cmd.service_name, {ip, id(), config_.registration.vivaldi, cmd.instance_id});
            reply(m, MessageKind::InstanceStatus,
                  {{"instance_id", cmd.instance_id},
                   {"state", "running"},
                   {"instance_ip", ip.str()},
                   {"worker_id", id()},
                   {"sla_violation", false}});
        } catch (const Error& e) {
            reply(m, MessageKind::InstanceStatus,
                  {{"instance_id", cmd.instance_id}, {"state", "failed"}, {"worker_id", id()}, {"reason", e.what()}});
        }
    }

    void query(overlay::Address a, bool force) {
        ++queries_;
        auto m = make(MessageKind::ResolveQuery, config_.cluster_id, {{"query", a.str()}, {"force", force}});
        const auto seq = m.seq;
        pending_queries_[seq] = a;
        transport().send(std::move(m));
        transport().set_timer(id(), config_.resolve_timeout_ms, [this, seq, a, force] {
            if (!pending_queries_.erase(seq)) return;
            if (!force) {
                query(a, true);
            } else {
                finish(a, std::nullopt);
            }
        });
    }

    void on_resolve_reply(const ControlMessage& m) {
        auto it = pending_queries_.find(m.correlation);
        if (it == pending_queries_.end()) return;
        const auto a = it->second;
        pending_queries_.erase(it);
        if (!m.body.value("found", false)) {
            finish(a, std::nullopt);
            return;
        }
        table_.install(codec::resolve_reply(m.body.at("reply")));
        std::optional<overlay::Binding> b;
        try {
            b = table_.pick(a);
        } catch (const UnresolvableError&) {
        }
        finish(a, b, true);
    }

    void finish(overlay::Address a, std::optional<overlay::Binding> first, bool repick = false) {
        auto it = resolving_.find(a);
        if (it == resolving_.end()) return;
        auto waiting = std::move(it->second);
        resolving_.erase(it);
        for (std::size_t i = 0; i < waiting.size(); ++i) {
            if (i == 0 || !repick) {
                waiting[i](first);
                continue;
            }
            std::optional<overlay::Binding> b;
            try {
                b = table_.pick(a);
            } catch (const UnresolvableError&) {
            }
            waiting[i](b);
        }
    }

    void on_table_update(const ControlMessage& m) {
        table_.push_update(m.body.at("service").get<std::string>(), codec::bindings(m.body.at("bindings")),
                           m.body.at("version").get<std::uint64_t>());
    }

    WorkerConfig config_;
    lifecycle::RuntimeAdapter* runtime_;
    std::unique_ptr<lifecycle::NodeEngine> engine_;
    overlay::ConversionTable table_;
    bool registered_ = false;
    std::uint64_t register_seq_ = 0;
    std::map<std::uint64_t, overlay::Address> pending_queries_;
    std::map<overlay::Address, std::vector<ResolveCallback>> resolving_;
    std::uint64_t queries_ = 0;
    std::uint64_t epoch_ = 0;
};

}  // namespace oak::control
