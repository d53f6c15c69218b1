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
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "oak/core/model.hpp"
#include "oak/core/placement.hpp"
#include "oak/errors.hpp"
#include "oak/scheduler/plugin.hpp"
#include "oak/scheduler/prioritize.hpp"

namespace oak::scheduler {

struct ScheduleRequest {
    TaskRequirements task;
    std::string service_id;
    int attempt = 0;
    std::set<core::ClusterId> excluded_clusters;
    std::set<core::WorkerId> excluded_workers;
    core::Millis deadline = 0;

    static ScheduleRequest make(std::string service_id, TaskRequirements task, core::Millis now) {
        ScheduleRequest r;
        r.deadline = now + task.convergence_time_ms;
        r.service_id = std::move(service_id);
        r.task = std::move(task);
        return r;
    }
};

/// Request messages sent while delegating, in order.
struct DelegationTrace {
    struct Hop {
        std::string from;
        core::ClusterId to;
    };
    std::vector<Hop> messages;
    std::vector<core::ClusterId> tried;  // clusters that ran a scheduling decision
    int decisions = 0;                   // root included
    std::size_t forwards = 0;            // messages along the final path
    std::size_t retries = 0;             // all other messages
    bool escalated = false;              // a reschedule had to involve the root

    std::size_t root_messages(const std::string& root_id) const {
        std::size_t n = 0;
        for (const auto& m : messages) n += m.from == root_id;
        return n;
    }
};

/// Everything delegate() needs besides the request.
struct DelegationEnv {
    const core::InfrastructureTree* tree = nullptr;
    const SchedulerRegistry* registry = nullptr;
    std::function<std::string(const core::ClusterId&)> scheduler_of = [](const core::ClusterId&) {
        return std::string("rom_best_slack");
    };
    std::function<core::Millis()> now = [] { return core::Millis{0}; };
    ScheduleContext* context = nullptr;
};

namespace detail {

inline std::vector<WorkerSnapshot> candidate_workers(const core::ClusterNode& node, const std::set<core::WorkerId>& excluded) {
    std::vector<WorkerSnapshot> out;
    out.reserve(node.workers.size());
    for (const auto& [id, w] : node.workers) {
        if (!excluded.count(id)) out.push_back(w);
    }
    return out;
}

class Delegation {
public:
    Delegation(ScheduleRequest req, DelegationEnv& env, DelegationTrace& trace)
        : req_(std::move(req)), env_(env), trace_(trace) {}

    std::optional<core::Placement> from(const std::string& node) { return try_children(node); }

    /// Leaf decision inside one cluster, without recursion.
    std::optional<core::Placement> local(const core::ClusterId& id) {
        check_deadline();
        ++trace_.decisions;
        const auto workers = candidate_workers(env_.tree->cluster(id), req_.excluded_workers);
        if (workers.empty()) return std::nullopt;
        try {
            const auto& plugin = env_.registry->get(env_.scheduler_of(id));
            const auto wid = plugin(workers, req_.task, *env_.context);
            return core::Placement{wid, env_.tree->path_to(id), env_.now()};
        } catch (const NoFeasibleWorkerError&) {
            return std::nullopt;
        }
    }

    const ScheduleRequest& request() const { return req_; }

private:
    void check_deadline() const {
        if (env_.now() > req_.deadline) {
            throw DeadlineExceededError("task " + std::to_string(req_.task.microservice_id) + " of " +
                                        req_.service_id);
        }
    }

    std::optional<core::Placement> try_cluster(const core::ClusterId& id) {
        trace_.tried.push_back(id);
        if (auto p = local(id)) return p;
        return try_children(id);
    }

    std::optional<core::Placement> try_children(const std::string& node) {
        std::vector<std::pair<core::ClusterId, core::AggregateStats>> kids;
        for (const auto& c : env_.tree->children_of(node)) {
            if (req_.excluded_clusters.count(c)) continue;
            const auto& cn = env_.tree->cluster(c);
            if (cn.last_aggregate) {
                kids.emplace_back(c, *cn.last_aggregate);
                continue;
            }
            try {
                kids.emplace_back(c, env_.tree->branch_aggregate(c));
            } catch (const EmptyAggregateError&) {
            }
        }
        if (kids.empty()) return std::nullopt;
        std::vector<ClusterPriority> order;
        try {
            order = root_prioritize(req_.task, kids);
        } catch (const NoFeasibleClusterError&) {
            return std::nullopt;
        }
        for (const auto& p : order) {
            if (!p.feasible) break;
            check_deadline();
            trace_.messages.push_back({node, p.cluster_id});
            if (auto placed = try_cluster(p.cluster_id)) return placed;
            req_.excluded_clusters.insert(p.cluster_id);
        }
        return std::nullopt;
    }

    ScheduleRequest req_;
    DelegationEnv& env_;
    DelegationTrace& trace_;
};

inline void classify(DelegationTrace& trace, const core::Placement& p) {
    trace.forwards = std::min(p.cluster_path.size(), trace.messages.size());
    trace.retries = trace.messages.size() - trace.forwards;
}

}  // namespace detail

/// t-step delegated scheduling from the root down the cluster tree.
inline core::Placement delegate(const ScheduleRequest& request, DelegationEnv& env, DelegationTrace* trace = nullptr) {
    DelegationTrace local_trace;
    auto& tr = trace ? *trace : local_trace;
    if (env.now() > request.deadline) throw DeadlineExceededError("deadline passed before scheduling started");
    ++tr.decisions;  // root prioritization
    detail::Delegation d(request, env, tr);
    auto placement = d.from(env.tree->root_id());
    if (!placement) {
        throw ExhaustedError("no cluster could place task " + std::to_string(request.task.microservice_id) + " of " +
                             request.service_id);
    }
    detail::classify(tr, *placement);
    return *placement;
}

/// Re-places a task whose worker failed: first inside `origin`, then through
/// the root with the failed worker excluded.
inline core::Placement reschedule(ScheduleRequest request, const core::ClusterId& origin,
                                  const core::WorkerId& failed_worker, DelegationEnv& env,
                                  DelegationTrace* trace = nullptr) {
    DelegationTrace local_trace;
    auto& tr = trace ? *trace : local_trace;
    request.excluded_workers.insert(failed_worker);
    request.excluded_clusters.erase(origin);
    ++request.attempt;
    {
        detail::Delegation d(request, env, tr);
        tr.tried.push_back(origin);
        if (auto p = d.local(origin)) {
            tr.forwards = tr.retries = 0;
            return *p;
        }
    }
    tr.escalated = true;
    return delegate(request, env, &tr);
}

}  // namespace oak::scheduler
