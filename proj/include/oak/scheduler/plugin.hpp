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
#include <random>
#include <span>
#include <string>
#include <vector>

#include "oak/errors.hpp"
#include "oak/scheduler/ldp.hpp"
#include "oak/scheduler/rom.hpp"

namespace oak::scheduler {

/// Inputs a cluster scheduler may consult besides the worker snapshots.
struct ScheduleContext {
    PlacedMap placed;
    RttProbe probe;
    std::mt19937_64 rng{0};
    LdpOptions ldp;
};

/// A cluster-level scheduler: picks one worker or throws NoFeasibleWorkerError.
using ClusterScheduler =
    std::function<core::WorkerId(std::span<const WorkerSnapshot>, const TaskRequirements&, ScheduleContext&)>;

class SchedulerRegistry {
public:
    /// Registry holding "rom_first_fit", "rom_best_slack" and "ldp".
    static SchedulerRegistry with_builtins() {
        SchedulerRegistry r;
        r.add("rom_first_fit", [](std::span<const WorkerSnapshot> w, const TaskRequirements& t, ScheduleContext&) {
            return rom_select(w, t, RomStrategy::first_fit);
        });
        r.add("rom_best_slack", [](std::span<const WorkerSnapshot> w, const TaskRequirements& t, ScheduleContext&) {
            return rom_select(w, t, RomStrategy::best_slack);
        });
        r.add("ldp", [](std::span<const WorkerSnapshot> w, const TaskRequirements& t, ScheduleContext& ctx) {
            return ldp_select(w, t, ctx.placed, ctx.probe, ctx.rng, ctx.ldp);
        });
        return r;
    }

    void add(const std::string& name, ClusterScheduler fn) { plugins_[name] = std::move(fn); }

    const ClusterScheduler& get(const std::string& name) const {
        auto it = plugins_.find(name);
        if (it == plugins_.end()) throw UnknownSchedulerError("'" + name + "'");
        return it->second;
    }

    bool contains(const std::string& name) const { return plugins_.count(name) != 0; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [n, _] : plugins_) out.push_back(n);
        return out;
    }

private:
    std::map<std::string, ClusterScheduler> plugins_;
};

}  // namespace oak::scheduler
