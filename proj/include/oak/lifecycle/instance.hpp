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

#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oak/core/capacity.hpp"
#include "oak/core/placement.hpp"
#include "oak/errors.hpp"
#include "oak/overlay/address.hpp"

namespace oak::lifecycle {

enum class InstanceState { requested, scheduled, running, terminated, failed };
enum class LifecycleEvent { placed, started, stopped, errored };

inline constexpr std::array<InstanceState, 5> kAllStates = {InstanceState::requested, InstanceState::scheduled,
                                                            InstanceState::running, InstanceState::terminated,
                                                            InstanceState::failed};
inline constexpr std::array<LifecycleEvent, 4> kAllEvents = {LifecycleEvent::placed, LifecycleEvent::started,
                                                             LifecycleEvent::stopped, LifecycleEvent::errored};

inline const char* state_name(InstanceState s) {
    switch (s) {
        case InstanceState::requested: return "requested";
        case InstanceState::scheduled: return "scheduled";
        case InstanceState::running: return "running";
        case InstanceState::terminated: return "terminated";
        case InstanceState::failed: return "failed";
    }
    return "?";
}

inline InstanceState parse_state(const std::string& s) {
    for (auto st : kAllStates) {
        if (s == state_name(st)) return st;
    }
    throw InvalidArgumentError("unknown instance state '" + s + "'");
}

inline const char* event_name(LifecycleEvent e) {
    switch (e) {
        case LifecycleEvent::placed: return "placed";
        case LifecycleEvent::started: return "started";
        case LifecycleEvent::stopped: return "stopped";
        case LifecycleEvent::errored: return "errored";
    }
    return "?";
}

inline bool is_terminal(InstanceState s) { return s == InstanceState::terminated || s == InstanceState::failed; }

/// The legal-edge table; nullopt for an illegal (state, event) pair.
inline std::optional<InstanceState> next_state(InstanceState s, LifecycleEvent e) {
    using S = InstanceState;
    using E = LifecycleEvent;
    switch (s) {
        case S::requested:
            if (e == E::placed) return S::scheduled;
            if (e == E::errored) return S::failed;
            break;
        case S::scheduled:
            if (e == E::started) return S::running;
            if (e == E::errored) return S::failed;
            break;
        case S::running:
            if (e == E::stopped) return S::terminated;
            if (e == E::errored) return S::failed;
            break;
        case S::terminated:
        case S::failed: break;
    }
    return std::nullopt;
}

using InstanceId = std::string;

struct ServiceInstance {
    InstanceId instance_id;
    std::string service_id;
    std::int64_t microservice_id = 0;
    InstanceState state = InstanceState::requested;
    std::optional<core::Placement> placement;  // present iff scheduled, running or terminated
    std::optional<overlay::Address> instance_ip;
    int violation_streak = 0;
    core::CapacityVector capacity;
    std::optional<InstanceId> migration_of;
    std::string last_worker;  // survives failure, for rescheduling
};

/// Applies `event`. `placement` is required for `placed`.
inline InstanceState transition(ServiceInstance& inst, LifecycleEvent event,
                                const std::optional<core::Placement>& placement = std::nullopt) {
    const auto next = next_state(inst.state, event);
    if (!next) {
        throw IllegalTransitionError(inst.instance_id + ": " + state_name(inst.state) + " + " + event_name(event));
    }
    if (event == LifecycleEvent::placed) {
        if (!placement) throw InvalidArgumentError("placed event needs a placement");
        inst.placement = placement;
        inst.last_worker = placement->worker_id;
    }
    if (event == LifecycleEvent::started) inst.violation_streak = 0;
    if (*next == InstanceState::failed) inst.placement.reset();
    inst.state = *next;
    return inst.state;
}

/// Every instance an orchestrator knows about.
class InstanceTable {
public:
    explicit InstanceTable(std::string id_prefix = "i") : prefix_(std::move(id_prefix)) {}

    ServiceInstance& create(const std::string& service_id, std::int64_t microservice_id,
                            const core::CapacityVector& capacity, std::optional<InstanceId> migration_of = std::nullopt) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "-%06llu", static_cast<unsigned long long>(++counter_));
        ServiceInstance inst;
        inst.instance_id = prefix_ + buf;
        inst.service_id = service_id;
        inst.microservice_id = microservice_id;
        inst.capacity = capacity;
        inst.migration_of = std::move(migration_of);
        return instances_.emplace(inst.instance_id, std::move(inst)).first->second;
    }

    /// Inserts an instance created elsewhere (e.g. mirrored from a peer).
    ServiceInstance& adopt(ServiceInstance inst) {
        auto id = inst.instance_id;
        return instances_.insert_or_assign(id, std::move(inst)).first->second;
    }

    bool contains(const InstanceId& id) const { return instances_.count(id) != 0; }
    ServiceInstance& at(const InstanceId& id) {
        auto it = instances_.find(id);
        if (it == instances_.end()) throw InvalidArgumentError("unknown instance " + id);
        return it->second;
    }
    const ServiceInstance& at(const InstanceId& id) const {
        auto it = instances_.find(id);
        if (it == instances_.end()) throw InvalidArgumentError("unknown instance " + id);
        return it->second;
    }

    InstanceState apply(const InstanceId& id, LifecycleEvent e,
                        const std::optional<core::Placement>& placement = std::nullopt) {
        return transition(at(id), e, placement);
    }

    /// Non-terminal instances placed on `worker`.
    std::vector<InstanceId> live_on(const core::WorkerId& worker) const {
        std::vector<InstanceId> out;
        for (const auto& [id, inst] : instances_) {
            if (inst.placement && !is_terminal(inst.state) && inst.placement->worker_id == worker) out.push_back(id);
        }
        return out;
    }

    std::vector<InstanceId> in_state(InstanceState s) const {
        std::vector<InstanceId> out;
        for (const auto& [id, inst] : instances_) {
            if (inst.state == s) out.push_back(id);
        }
        return out;
    }

    std::vector<InstanceId> running_of(const std::string& service_id, std::int64_t microservice_id) const {
        std::vector<InstanceId> out;
        for (const auto& [id, inst] : instances_) {
            if (inst.state == InstanceState::running && inst.service_id == service_id &&
                inst.microservice_id == microservice_id) {
                out.push_back(id);
            }
        }
        return out;
    }

    const std::map<InstanceId, ServiceInstance>& all() const { return instances_; }
    std::size_t size() const { return instances_.size(); }

private:
    std::string prefix_;
    std::uint64_t counter_ = 0;
    std::map<InstanceId, ServiceInstance> instances_;
};

}  // namespace oak::lifecycle
