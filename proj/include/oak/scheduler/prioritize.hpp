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
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "oak/core/model.hpp"
#include "oak/core/sla.hpp"
#include "oak/errors.hpp"

namespace oak::scheduler {

struct ClusterPriority {
    core::ClusterId cluster_id;
    double score = -std::numeric_limits<double>::infinity();
    bool feasible = false;
};

/// Hard filters a cluster aggregate has to pass for `t`.
inline bool cluster_feasible(const core::TaskRequirements& t, const core::AggregateStats& s) {
    for (auto d : core::kAggregatedDims) {
        if (s[d].sum < t.capacity.get(d)) return false;
    }
    if (!s.supported_virtualizations.count(t.virtualization)) return false;
    if (t.area && !t.area->zone.empty() && !s.geo_zone.empty() && !s.geo_zone.intersects(t.area->zone)) return false;
    return true;
}

/// Sum over dimensions of (mean - requirement) / max(requirement, 1).
inline double mean_slack_score(const core::TaskRequirements& t, const core::AggregateStats& s) {
    double score = 0.0;
    for (auto d : core::kAggregatedDims) {
        const double q = t.capacity.get(d);
        score += (s[d].mean - q) / std::max(q, 1.0);
    }
    return score;
}

/// Ranks child clusters for `t`: feasible ones by descending score (ties by
/// ascending id), infeasible ones after them with a -inf score.
inline std::vector<ClusterPriority> root_prioritize(const core::TaskRequirements& t,
                                                    const std::vector<std::pair<core::ClusterId, core::AggregateStats>>& children) {
    std::vector<ClusterPriority> out;
    out.reserve(children.size());
    bool any = false;
    for (const auto& [id, stats] : children) {
        ClusterPriority p{id};
        if (cluster_feasible(t, stats)) {
            p.feasible = true;
            p.score = mean_slack_score(t, stats);
            any = true;
        }
        out.push_back(p);
    }
    if (!any) throw NoFeasibleClusterError("no cluster can host task " + std::to_string(t.microservice_id));
    std::sort(out.begin(), out.end(), [](const ClusterPriority& a, const ClusterPriority& b) {
        if (a.feasible != b.feasible) return a.feasible;
        if (a.score != b.score) return a.score > b.score;
        return a.cluster_id < b.cluster_id;
    });
    return out;
}

}  // namespace oak::scheduler
