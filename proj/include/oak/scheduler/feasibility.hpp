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

#include "oak/coords/geodesy.hpp"
#include "oak/core/model.hpp"
#include "oak/core/sla.hpp"

namespace oak::scheduler {

using core::TaskRequirements;
using core::WorkerSnapshot;

inline bool virtualization_ok(const WorkerSnapshot& w, const TaskRequirements& t) { return w.supports(t.virtualization); }

/// Non-negative cpu and memory slack, plus room for any accelerator or
/// bandwidth the task asks for.
inline bool capacity_ok(const WorkerSnapshot& w, const TaskRequirements& t) {
    const auto a = core::available(w);
    return a.cpu_cores - t.capacity.cpu_cores >= 0.0 && a.memory_mb - t.capacity.memory_mb >= 0 &&
           a.gpu_units >= t.capacity.gpu_units && a.tpu_units >= t.capacity.tpu_units &&
           a.bandwidth_in_mbps >= t.capacity.bandwidth_in_mbps;
}

/// Task-level geography: inside `area` when given, and within `threshold` km
/// of `location` when both are given.
inline bool geography_ok(const WorkerSnapshot& w, const TaskRequirements& t) {
    if (t.area && !t.area->zone.empty() && !t.area->zone.contains(w.geo)) return false;
    if (t.location && t.threshold && coords::dist_gc(w.geo, *t.location) > *t.threshold) return false;
    return true;
}

inline bool resource_feasible(const WorkerSnapshot& w, const TaskRequirements& t) {
    return virtualization_ok(w, t) && capacity_ok(w, t) && geography_ok(w, t);
}

/// cpu slack plus memory slack.
inline double slack_score(const WorkerSnapshot& w, const TaskRequirements& t) {
    const auto a = core::available(w);
    return (a.cpu_cores - t.capacity.cpu_cores) + static_cast<double>(a.memory_mb - t.capacity.memory_mb);
}

}  // namespace oak::scheduler
