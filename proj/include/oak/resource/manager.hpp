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
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "oak/coords/vivaldi.hpp"
#include "oak/core/model.hpp"
#include "oak/errors.hpp"
#include "oak/lifecycle/instance.hpp"
#include "oak/overlay/address.hpp"

namespace oak::resource {

using core::CapacityVector;
using core::ClusterId;
using core::Millis;
using core::WorkerId;

struct TelemetryConfig {
    Millis update_interval_ms = 1000;
    double delta_threshold = 0.0;  // max relative change per dimension, vs declared capacity
    Millis staleness_timeout_ms = 3000;

    void validate() const {
        if (update_interval_ms <= 0) throw InvalidArgumentError("update_interval_ms must be positive");
        if (!(delta_threshold >= 0.0 && delta_threshold <= 1.0)) {
            throw InvalidArgumentError("delta_threshold must be in [0,1]");
        }
        if (staleness_timeout_ms < 3 * update_interval_ms) {
            throw InvalidArgumentError("staleness_timeout_ms must be at least 3 update intervals");
        }
    }
};

struct RegistrationRecord {
    std::string id;
    CapacityVector declared_capacity;
    std::set<std::string> virtualizations = {"container"};
    core::GeoPoint geo;
    Millis registered_at = 0;
    std::optional<overlay::WorkerSubnet> assigned_subnet;
    coords::VivaldiCoordinate vivaldi = coords::VivaldiCoordinate::origin();
};

struct TelemetryReport {
    WorkerId worker_id;
    CapacityVector used;
    coords::VivaldiCoordinate vivaldi = coords::VivaldiCoordinate::origin();
    std::uint64_t seq = 0;
};

/// Largest per-dimension change of `after` against `before`, relative to
/// `capacity`. Dimensions without capacity are ignored.
inline double max_relative_change(const CapacityVector& before, const CapacityVector& after,
                                  const CapacityVector& capacity) {
    double best = 0.0;
    auto consider = [&](double b, double a, double cap) {
        if (cap > 0.0) best = std::max(best, std::abs(a - b) / cap);
    };
    consider(before.cpu_cores, after.cpu_cores, capacity.cpu_cores);
    consider(static_cast<double>(before.memory_mb), static_cast<double>(after.memory_mb),
             static_cast<double>(capacity.memory_mb));
    consider(static_cast<double>(before.gpu_units), static_cast<double>(after.gpu_units),
             static_cast<double>(capacity.gpu_units));
    consider(static_cast<double>(before.tpu_units), static_cast<double>(after.tpu_units),
             static_cast<double>(capacity.tpu_units));
    consider(static_cast<double>(before.bandwidth_in_mbps), static_cast<double>(after.bandwidth_in_mbps),
             static_cast<double>(capacity.bandwidth_in_mbps));
    return best;
}

/// Worker registry and telemetry bookkeeping of one cluster orchestrator.
class ClusterResourceManager {
public:
    ClusterResourceManager(ClusterId cluster_id, std::uint32_t cluster_index, TelemetryConfig config = {})
        : cluster_id_(std::move(cluster_id)), subnets_(cluster_index), config_(config) {
        config_.validate();
    }

    const ClusterId& cluster_id() const { return cluster_id_; }
    const TelemetryConfig& config() const { return config_; }

    /// Registers a worker and returns its subnet. A worker that was marked
    /// unavailable (or has gone stale) may register again; it keeps its subnet
    /// and starts from zero utilization.
    overlay::WorkerSubnet register_worker(RegistrationRecord record) {
        const auto& cap = record.declared_capacity;
        if (!(cap.cpu_cores > 0.0) || cap.memory_mb <= 0 || !cap.non_negative()) {
            throw CapacityInvalidError("worker " + record.id + " declares non-positive cpu or memory");
        }
        if (record.id.empty()) throw InvalidArgumentError("empty worker id");
        auto it = workers_.find(record.id);
        if (it != workers_.end()) {
            auto& e = it->second;
            if (!e.unavailable && !stale(e, record.registered_at)) throw DuplicateIdError(record.id);
            record.assigned_subnet = e.subnet;
            e = entry_for(record, e.subnet);
            return e.subnet;
        }
        const auto subnet = subnets_.allocate();
        record.assigned_subnet = subnet;
        workers_.emplace(record.id, entry_for(record, subnet));
        return subnet;
    }

    /// Applies a telemetry report. Returns whether the snapshot changed.
    bool push_telemetry(const TelemetryReport& report, Millis now) {
        auto it = workers_.find(report.worker_id);
        if (it == workers_.end()) throw UnknownWorkerError(report.worker_id);
        auto& e = it->second;
        const bool revived = e.unavailable;
        if (!revived && e.last_seq && report.seq <= *e.last_seq) {
            ++dropped_;
            return false;
        }
        core::checked_sub(e.snapshot.capacity, report.used);  // throws UnderflowError, nothing touched yet
        e.last_seq = report.seq;
        e.snapshot.last_update = now;
        if (revived) {
            e.unavailable = false;
            e.has_report = false;
            e.snapshot.used = {};
        }
        const bool first = !e.has_report;
        if (!first && max_relative_change(e.reported, report.used, e.snapshot.capacity) < config_.delta_threshold) {
            return false;
        }
        e.has_report = true;
        e.reported = report.used;
        e.snapshot.used = report.used;
        e.snapshot.vivaldi = report.vivaldi;
        return true;
    }

    /// Records the latest aggregate of a child cluster; stale sequence numbers are dropped.
    bool push_child_aggregate(const ClusterId& child, const core::AggregateStats& stats, std::uint64_t seq, Millis now) {
        auto& c = children_[child];
        if (c.last_seq && seq <= *c.last_seq) {
            ++dropped_;
            return false;
        }
        c.last_seq = seq;
        c.stats = stats;
        c.received_at = now;
        return true;
    }

    void remove_child(const ClusterId& child) { children_.erase(child); }

    /// Optimistic bookkeeping between a placement and the worker's next report.
    void reserve(const WorkerId& worker, const CapacityVector& q) {
        auto& e = entry(worker);
        e.snapshot.used += q;
    }
    void release(const WorkerId& worker, const CapacityVector& q) {
        auto& e = entry(worker);
        auto& u = e.snapshot.used;
        u.cpu_cores = std::max(0.0, u.cpu_cores - q.cpu_cores);
        u.memory_mb = std::max<std::int64_t>(0, u.memory_mb - q.memory_mb);
        u.gpu_units = std::max<std::int64_t>(0, u.gpu_units - q.gpu_units);
        u.tpu_units = std::max<std::int64_t>(0, u.tpu_units - q.tpu_units);
        u.bandwidth_in_mbps = std::max<std::int64_t>(0, u.bandwidth_in_mbps - q.bandwidth_in_mbps);
    }

    bool is_live(const WorkerId& worker, Millis now) const {
        auto it = workers_.find(worker);
        return it != workers_.end() && !it->second.unavailable && !stale(it->second, now);
    }
    bool is_registered(const WorkerId& worker) const { return workers_.count(worker) != 0; }
    bool is_unavailable(const WorkerId& worker) const { return entry(worker).unavailable; }

    const core::WorkerSnapshot& snapshot(const WorkerId& worker) const { return entry(worker).snapshot; }
    const overlay::WorkerSubnet& subnet_of(const WorkerId& worker) const { return entry(worker).subnet; }
    std::vector<WorkerId> worker_ids() const {
        std::vector<WorkerId> out;
        for (const auto& [id, _] : workers_) out.push_back(id);
        return out;
    }

    /// Snapshots of every live worker, ordered by worker id.
    std::vector<core::WorkerSnapshot> live_snapshots(Millis now) const {
        std::vector<core::WorkerSnapshot> out;
        for (const auto& [id, e] : workers_) {
            if (!e.unavailable && !stale(e, now)) out.push_back(e.snapshot);
        }
        return out;
    }

    /// Latest aggregates of children that are still reporting.
    std::map<ClusterId, core::AggregateStats> live_child_aggregates(Millis now) const {
        std::map<ClusterId, core::AggregateStats> out;
        for (const auto& [id, c] : children_) {
            if (c.stats && now - c.received_at <= config_.staleness_timeout_ms) out.emplace(id, *c.stats);
        }
        return out;
    }

    /// Aggregate over live workers and live child aggregates. Workers found
    /// stale are listed in stale_workers().
    core::AggregateStats collect_aggregate(Millis now) {
        stale_flagged_.clear();
        std::vector<core::WorkerSnapshot> live;
        for (const auto& [id, e] : workers_) {
            if (e.unavailable || stale(e, now)) {
                stale_flagged_.insert(id);
            } else {
                live.push_back(e.snapshot);
            }
        }
        std::vector<core::AggregateStats> kids;
        for (auto& [_, s] : live_child_aggregates(now)) kids.push_back(s);
        return core::aggregate(std::span<const core::WorkerSnapshot>(live), std::span<const core::AggregateStats>(kids));
    }

    const std::set<WorkerId>& stale_workers() const { return stale_flagged_; }

    /// Marks silent workers unavailable and fails every instance they host.
    /// Returns the failed instance ids; a worker is reported only once.
    std::vector<lifecycle::InstanceId> mark_stale_and_fail(Millis now, lifecycle::InstanceTable& instances) {
        std::vector<lifecycle::InstanceId> failed;
        for (auto& [id, e] : workers_) {
            if (e.unavailable || !stale(e, now)) continue;
            e.unavailable = true;
            for (const auto& iid : instances.live_on(id)) {
                instances.apply(iid, lifecycle::LifecycleEvent::errored);
                failed.push_back(iid);
            }
        }
        return failed;
    }

    /// Explicitly marks a worker unavailable (e.g. its session went down).
    std::vector<lifecycle::InstanceId> fail_worker(const WorkerId& worker, lifecycle::InstanceTable& instances) {
        auto& e = entry(worker);
        std::vector<lifecycle::InstanceId> failed;
        if (e.unavailable) return failed;
        e.unavailable = true;
        for (const auto& iid : instances.live_on(worker)) {
            instances.apply(iid, lifecycle::LifecycleEvent::errored);
            failed.push_back(iid);
        }
        return failed;
    }

    std::uint64_t dropped_out_of_order() const { return dropped_; }

private:
    struct Entry {
        core::WorkerSnapshot snapshot;
        overlay::WorkerSubnet subnet;
        CapacityVector reported;
        std::optional<std::uint64_t> last_seq;
        bool has_report = false;
        bool unavailable = false;
    };
    struct Child {
        std::optional<core::AggregateStats> stats;
        std::optional<std::uint64_t> last_seq;
        Millis received_at = 0;
    };

    static Entry entry_for(const RegistrationRecord& r, overlay::WorkerSubnet subnet) {
        Entry e;
        e.snapshot.worker_id = r.id;
        e.snapshot.capacity = r.declared_capacity;
        e.snapshot.geo = r.geo;
        e.snapshot.vivaldi = r.vivaldi;
        e.snapshot.virtualizations = r.virtualizations;
        e.snapshot.last_update = r.registered_at;
        e.subnet = subnet;
        return e;
    }

    bool stale(const Entry& e, Millis now) const { return now - e.snapshot.last_update > config_.staleness_timeout_ms; }

    Entry& entry(const WorkerId& w) {
        auto it = workers_.find(w);
        if (it == workers_.end()) throw UnknownWorkerError(w);
        return it->second;
    }
    const Entry& entry(const WorkerId& w) const {
        auto it = workers_.find(w);
        if (it == workers_.end()) throw UnknownWorkerError(w);
        return it->second;
    }

    ClusterId cluster_id_;
    overlay::SubnetAllocator subnets_;
    TelemetryConfig config_;
    std::map<WorkerId, Entry> workers_;
    std::map<ClusterId, Child> children_;
    std::set<WorkerId> stale_flagged_;
    std::uint64_t dropped_ = 0;
};

}  // namespace oak::resource
