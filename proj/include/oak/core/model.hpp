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
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oak/coords/vivaldi.hpp"
#include "oak/core/capacity.hpp"
#include "oak/core/geo.hpp"
#include "oak/errors.hpp"

namespace oak::core {

/// Milliseconds on whichever clock drives the component (virtual in
/// simulation, steady clock in live mode).
using Millis = std::int64_t;

using WorkerId = std::string;
using ClusterId = std::string;

struct WorkerSnapshot {
    WorkerId worker_id;
    CapacityVector capacity;  // maximum, as declared at registration
    CapacityVector used;
    GeoPoint geo;
    coords::VivaldiCoordinate vivaldi = coords::VivaldiCoordinate::origin();
    std::set<std::string> virtualizations = {"container"};
    Millis last_update = 0;

    bool supports(const std::string& tag) const { return virtualizations.count(tag) != 0; }
};

/// Availability of a worker: capacity minus utilization. Throws
/// UnderflowError when the report claims more than the declared capacity.
inline CapacityVector available(const WorkerSnapshot& snapshot) {
    return checked_sub(snapshot.capacity, snapshot.used);
}

/// Sum/mean/population-std of one capacity dimension.
struct MomentStats {
    double sum = 0.0;
    double mean = 0.0;
    double std = 0.0;

    friend bool operator==(const MomentStats&, const MomentStats&) = default;
};

/// What a cluster reports upward about the availability of everything below it.
struct AggregateStats {
    std::array<MomentStats, 4> dims{};
    std::int64_t worker_count = 0;
    std::set<std::string> supported_virtualizations;
    GeoZone geo_zone;

    const MomentStats& operator[](Dim d) const { return dims[static_cast<std::size_t>(d)]; }
    MomentStats& operator[](Dim d) { return dims[static_cast<std::size_t>(d)]; }

    friend bool operator==(const AggregateStats&, const AggregateStats&) = default;
};

namespace detail {

struct Moments {
    double n = 0.0;
    double sum = 0.0;
    double m2 = 0.0;

    void merge(double n2, double sum2, double m2b) {
        if (n2 == 0.0) return;
        if (n == 0.0) {
            n = n2, sum = sum2, m2 = m2b;
            return;
        }
        const double delta = sum2 / n2 - sum / n;
        const double total = n + n2;
        m2 = m2 + m2b + delta * delta * n * n2 / total;
        sum += sum2;
        n = total;
    }
};

}  // namespace detail

/// Merges leaf availabilities with already-aggregated child clusters. Child
/// triples are folded in with the parallel-moments update, so the result
/// matches a flat aggregation over every leaf underneath.
inline AggregateStats aggregate(std::span<const CapacityVector> workers,
                                std::span<const AggregateStats> child_aggregates) {
    std::int64_t count = static_cast<std::int64_t>(workers.size());
    for (const auto& c : child_aggregates) count += c.worker_count;
    if (count == 0) throw EmptyAggregateError("no workers and no child aggregates");

    AggregateStats out;
    out.worker_count = count;
    for (Dim d : kAggregatedDims) {
        detail::Moments m;
        if (!workers.empty()) {
            const double n = static_cast<double>(workers.size());
            double sum = 0.0;
            for (const auto& w : workers) sum += w.get(d);
            const double mean = sum / n;
            double m2 = 0.0;
            for (const auto& w : workers) {
                const double dev = w.get(d) - mean;
                m2 += dev * dev;
            }
            m.merge(n, sum, m2);
        }
        for (const auto& c : child_aggregates) {
            const double n = static_cast<double>(c.worker_count);
            m.merge(n, c[d].sum, c[d].std * c[d].std * n);
        }
        auto& out_d = out[d];
        out_d.sum = m.sum;
        out_d.mean = m.sum / m.n;
        out_d.std = std::sqrt(std::max(m.m2, 0.0) / m.n);
    }
    for (const auto& c : child_aggregates) {
        out.supported_virtualizations.insert(c.supported_virtualizations.begin(), c.supported_virtualizations.end());
    }
    return out;
}

/// Aggregates worker snapshots: capacity moments plus the union of runtime
/// tags and the convex hull of worker positions and child zones.
inline AggregateStats aggregate(std::span<const WorkerSnapshot> workers,
                                std::span<const AggregateStats> child_aggregates) {
    std::vector<CapacityVector> avail;
    avail.reserve(workers.size());
    std::vector<GeoPoint> points;
    for (const auto& w : workers) {
        avail.push_back(available(w));
        points.push_back(w.geo);
    }
    auto out = aggregate(std::span<const CapacityVector>(avail), child_aggregates);
    for (const auto& w : workers) {
        out.supported_virtualizations.insert(w.virtualizations.begin(), w.virtualizations.end());
    }
    for (const auto& c : child_aggregates) {
        points.insert(points.end(), c.geo_zone.vertices().begin(), c.geo_zone.vertices().end());
    }
    out.geo_zone = GeoZone::hull_of(points);
    return out;
}

struct ClusterNode {
    ClusterId cluster_id;
    std::string orchestrator_endpoint;
    std::map<WorkerId, WorkerSnapshot> workers;
    std::set<ClusterId> child_clusters;
    std::optional<AggregateStats> last_aggregate;
    GeoZone geo_zone;
};

/// Oriented tree of clusters. The root orchestrator is the implicit C0 and is
/// not stored in `clusters`; top-level clusters hang off `root_id`.
class InfrastructureTree {
public:
    explicit InfrastructureTree(std::string root_id = "root") : root_id_(std::move(root_id)) {}

    const std::string& root_id() const { return root_id_; }
    const std::map<ClusterId, ClusterNode>& clusters() const { return clusters_; }
    const std::set<std::pair<std::string, ClusterId>>& edges() const { return edges_; }

    /// Attaches `node` below `parent` (root_id for a top-level cluster).
    ClusterNode& add_cluster(const std::string& parent, ClusterNode node) {
        if (node.cluster_id.empty() || node.cluster_id == root_id_) {
            throw TreeInvariantError("invalid cluster id '" + node.cluster_id + "'");
        }
        if (clusters_.count(node.cluster_id)) throw TreeInvariantError("duplicate cluster " + node.cluster_id);
        if (parent != root_id_ && !clusters_.count(parent)) throw TreeInvariantError("unknown parent " + parent);
        for (const auto& [wid, _] : node.workers) {
            if (worker_owner_.count(wid)) throw TreeInvariantError("worker " + wid + " already in a cluster");
            if (clusters_.count(wid)) throw TreeInvariantError("id " + wid + " used by a cluster");
        }
        for (const auto& [wid, _] : node.workers) worker_owner_[wid] = node.cluster_id;
        const auto id = node.cluster_id;
        node.child_clusters.clear();
        edges_.emplace(parent, id);
        parent_[id] = parent;
        if (parent != root_id_) clusters_.at(parent).child_clusters.insert(id);
        return clusters_.emplace(id, std::move(node)).first->second;
    }

    void add_worker(const ClusterId& cluster, WorkerSnapshot w) {
        auto& node = cluster_mut(cluster);
        if (worker_owner_.count(w.worker_id)) throw TreeInvariantError("worker " + w.worker_id + " already in a cluster");
        worker_owner_[w.worker_id] = cluster;
        node.workers.emplace(w.worker_id, std::move(w));
    }

    ClusterNode& cluster_mut(const ClusterId& id) {
        auto it = clusters_.find(id);
        if (it == clusters_.end()) throw TreeInvariantError("unknown cluster " + id);
        return it->second;
    }
    const ClusterNode& cluster(const ClusterId& id) const {
        auto it = clusters_.find(id);
        if (it == clusters_.end()) throw TreeInvariantError("unknown cluster " + id);
        return it->second;
    }

    std::vector<ClusterId> children_of(const std::string& id) const {
        std::vector<ClusterId> out;
        for (auto it = edges_.lower_bound({id, ""}); it != edges_.end() && it->first == id; ++it) {
            out.push_back(it->second);
        }
        return out;
    }

    const std::string& parent_of(const ClusterId& id) const {
        auto it = parent_.find(id);
        if (it == parent_.end()) throw TreeInvariantError("unknown cluster " + id);
        return it->second;
    }

    std::optional<ClusterId> owner_of(const WorkerId& worker) const {
        auto it = worker_owner_.find(worker);
        if (it == worker_owner_.end()) return std::nullopt;
        return it->second;
    }

    /// Cluster ids from the top-level cluster down to `id`.
    std::vector<ClusterId> path_to(const ClusterId& id) const {
        std::vector<ClusterId> path;
        std::string cur = id;
        while (cur != root_id_) {
            path.push_back(cur);
            cur = parent_of(cur);
            if (path.size() > clusters_.size()) throw TreeInvariantError("cycle detected");
        }
        return {path.rbegin(), path.rend()};
    }

    /// Number of levels including the root (a root with one cluster has depth 2).
    std::size_t depth() const {
        std::size_t best = 1;
        for (const auto& [id, _] : clusters_) best = std::max(best, path_to(id).size() + 1);
        return best;
    }

    /// Every cluster in the subtree rooted at `id`, including `id`.
    std::vector<ClusterId> subtree(const ClusterId& id) const {
        std::vector<ClusterId> out{id};
        for (std::size_t i = 0; i < out.size(); ++i) {
            for (auto& c : children_of(out[i])) out.push_back(c);
        }
        return out;
    }

    /// Checks the oriented-tree invariants; throws TreeInvariantError.
    void validate() const {
        std::map<ClusterId, int> indegree;
        for (const auto& [id, _] : clusters_) indegree[id] = 0;
        for (const auto& [p, c] : edges_) {
            if (!indegree.count(c)) throw TreeInvariantError("edge to unknown cluster " + c);
            if (p != root_id_ && !clusters_.count(p)) throw TreeInvariantError("edge from unknown cluster " + p);
            ++indegree[c];
        }
        for (const auto& [id, deg] : indegree) {
            if (deg != 1) throw TreeInvariantError("cluster " + id + " has " + std::to_string(deg) + " parents");
        }
        std::set<ClusterId> seen;
        std::vector<std::string> frontier{root_id_};
        while (!frontier.empty()) {
            auto cur = frontier.back();
            frontier.pop_back();
            for (auto& c : children_of(cur)) {
                if (!seen.insert(c).second) throw TreeInvariantError("cycle through " + c);
                frontier.push_back(c);
            }
        }
        if (seen.size() != clusters_.size()) throw TreeInvariantError("clusters unreachable from root");
        std::set<WorkerId> workers;
        for (const auto& [id, node] : clusters_) {
            for (const auto& [wid, _] : node.workers) {
                if (!workers.insert(wid).second) throw TreeInvariantError("worker " + wid + " in two clusters");
                if (clusters_.count(wid)) throw TreeInvariantError("worker id collides with cluster " + wid);
            }
        }
    }

    /// Aggregate of the branch rooted at `id`, recomputed from its leaves.
    AggregateStats branch_aggregate(const ClusterId& id) const {
        std::vector<AggregateStats> children;
        for (auto& c : children_of(id)) {
            try {
                children.push_back(branch_aggregate(c));
            } catch (const EmptyAggregateError&) {
            }
        }
        std::vector<WorkerSnapshot> ws;
        for (const auto& [_, w] : cluster(id).workers) ws.push_back(w);
        return aggregate(std::span<const WorkerSnapshot>(ws), std::span<const AggregateStats>(children));
    }

private:
    std::string root_id_;
    std::map<ClusterId, ClusterNode> clusters_;
    std::set<std::pair<std::string, ClusterId>> edges_;
    std::map<ClusterId, std::string> parent_;
    std::map<WorkerId, ClusterId> worker_owner_;
};

}  // namespace oak::core
