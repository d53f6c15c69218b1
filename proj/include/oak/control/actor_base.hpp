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

#include <chrono>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "oak/control/message.hpp"
#include "oak/control/transport.hpp"
#include "oak/core/placement.hpp"
#include "oak/core/sla.hpp"
#include "oak/lifecycle/instance.hpp"

namespace oak::control {

/// Outcome of one scheduling job at the root.
struct ScheduleRecord {
    std::string instance_id;
    std::string service_id;
    std::int64_t microservice_id = 0;
    std::string kind;  // initial, reschedule, migration, replica
    bool ok = false;
    std::optional<core::Placement> placement;
    core::Millis requested_at = 0;
    core::Millis decided_at = 0;
    int clusters_tried = 0;
    std::string instance_ip;
    core::GeoPoint worker_geo;
    coords::VivaldiCoordinate worker_vivaldi = coords::VivaldiCoordinate::origin();
    std::string reason;
};

/// Hooks the simulator uses to collect metrics. All default to no-ops.
class Observer {
public:
    virtual ~Observer() = default;
    virtual void root_calc(const std::string& /*instance_id*/, double /*us*/) {}
    virtual void cluster_calc(const std::string& /*cluster*/, const std::string& /*instance_id*/, double /*us*/) {}
    virtual void scheduled(const ScheduleRecord&) {}
    virtual void instance_state(core::Millis, const std::string& /*where*/, const std::string& /*instance_id*/,
                                lifecycle::InstanceState) {}
    virtual void rescheduled(core::Millis, const std::string& /*cluster*/, const std::string& /*failed*/,
                             const std::string& /*replacement*/, bool /*local*/, bool /*ok*/) {}
};

inline Observer& null_observer() {
    static Observer o;
    return o;
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double micros() const {
        return std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

/// FNV-1a; stable across platforms, used to derive per-actor seeds.
inline std::uint64_t stable_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// Overlay name of a microservice: its task name, or "<service>-<id>".
inline std::string overlay_name(const std::string& service_id, const core::TaskRequirements& t) {
    std::string n = t.name.empty() ? service_id + "-" + std::to_string(t.microservice_id) : t.name;
    for (auto& c : n) {
        if (c == '.') c = '-';
    }
    return n;
}

/// Id, outgoing sequence numbers and inbound de-duplication shared by the
/// three orchestration roles. One counter covers all kinds, so every
/// (sender, kind) stream is strictly increasing and a request seq is unique
/// per sender.
class ActorBase : public Actor {
public:
    ActorBase(std::string id, Transport& transport, Observer* observer)
        : id_(std::move(id)), transport_(&transport), observer_(observer ? observer : &null_observer()) {}

    const std::string& id() const override { return id_; }
    Transport& transport() { return *transport_; }
    std::uint64_t duplicates_dropped() const { return inbound_.dropped(); }

protected:
    ControlMessage make(MessageKind k, const std::string& to, nlohmann::json body, std::uint64_t correlation = 0) {
        return ControlMessage{k, id_, to, ++seq_, correlation, std::move(body)};
    }

    void send(MessageKind k, const std::string& to, nlohmann::json body, std::uint64_t correlation = 0) {
        transport_->send(make(k, to, std::move(body), correlation));
    }

    void reply(const ControlMessage& request, MessageKind k, nlohmann::json body) {
        send(k, request.sender, std::move(body), request.seq);
    }

    /// A registration starts a fresh stream from that sender.
    bool accept(const ControlMessage& m) {
        if (m.kind == MessageKind::RegisterWorker && m.correlation == 0) inbound_.forget(m.sender);
        return inbound_.accept(m);
    }

    core::Millis now() const { return transport_->now(); }
    Observer& observer() { return *observer_; }

    std::string id_;
    Transport* transport_;
    Observer* observer_;
    std::uint64_t seq_ = 0;
    SeqTracker inbound_;
};

}  // namespace oak::control
