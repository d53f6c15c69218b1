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

#include <span>
#include <string>
#include <vector>

#include "oak/errors.hpp"
#include "oak/scheduler/feasibility.hpp"

namespace oak::scheduler {

enum class RomStrategy { best_slack, first_fit };

/// Highest slack score among `candidates`; ties go to the lowest worker id.
inline const WorkerSnapshot* best_slack_of(std::span<const WorkerSnapshot* const> candidates, const TaskRequirements& t) {
    const WorkerSnapshot* best = nullptr;
    double best_score = 0.0;
    for (const auto* w : candidates) {
        const double s = slack_score(*w, t);
        if (!best || s > best_score || (s == best_score && w->worker_id < best->worker_id)) {
            best = w;
            best_score = s;
        }
    }
    return best;
}

/// Resource-only match.
inline core::WorkerId rom_select(std::span<const WorkerSnapshot> workers, const TaskRequirements& t,
                                 RomStrategy strategy) {
    if (strategy == RomStrategy::first_fit) {
        for (const auto& w : workers) {
            if (resource_feasible(w, t)) return w.worker_id;
        }
        throw NoFeasibleWorkerError("no worker fits task " + std::to_string(t.microservice_id));
    }
    std::vector<const WorkerSnapshot*> ok;
    for (const auto& w : workers) {
        if (resource_feasible(w, t)) ok.push_back(&w);
    }
    if (ok.empty()) throw NoFeasibleWorkerError("no worker fits task " + std::to_string(t.microservice_id));
    return best_slack_of(ok, t)->worker_id;
}

}  // namespace oak::scheduler
