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
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "oak/coords/geodesy.hpp"
#include "oak/coords/trilateration.hpp"
#include "oak/coords/vivaldi.hpp"
#include "oak/core/placement.hpp"
#include "oak/errors.hpp"
#include "oak/scheduler/rom.hpp"

namespace oak::scheduler {

/// An already placed task as seen by service-to-service constraints.
struct PlacedTask {
    core::Placement placement;
    core::GeoPoint geo;
    coords::VivaldiCoordinate vivaldi;
};

using PlacedMap = std::map<std::int64_t, PlacedTask>;

/// One ping from a worker to a user endpoint, in milliseconds.
using RttProbe = std::function<double(const WorkerSnapshot& worker, const std::string& user_endpoint)>;

struct LdpOptions {
    int pings_per_probe = 3;  // the median is used
    coords::TrilaterationOptions trilateration;
};

/// What one service-to-user stage measured.
struct UserEstimate {
    std::string user_endpoint;
    std::vector<core::WorkerId> anchors;
    std::vector<double> rtts_ms;
    coords::VivaldiCoordinate user;
};

struct LdpResult {
    std::vector<core::WorkerId> survivors;  // in input order
    std::vector<UserEstimate> estimates;    // one per S2U constraint that was evaluated
};

namespace detail {

inline double median_ping(const RttProbe& probe, const WorkerSnapshot& w, const std::string& user, int pings) {
    std::vector<double> xs;
    for (int i = 0; i < std::max(1, pings); ++i) xs.push_back(probe(w, user));
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

/// Draws up to `count` distinct anchors near the constraint's target: a
/// random pick among survivors inside the geo threshold, then survivors by
/// distance to the target, then the remaining workers by distance.
inline std::vector<const WorkerSnapshot*> pick_anchors(const std::vector<const WorkerSnapshot*>& survivors,
                                                       std::span<const WorkerSnapshot> all, std::size_t count,
                                                       const core::S2UConstraint& c, std::mt19937_64& rng) {
    auto km = [&](const WorkerSnapshot* w) { return coords::dist_gc(w->geo, c.geo_target); };
    std::vector<const WorkerSnapshot*> inside, outside;
    for (const auto* w : survivors) (km(w) <= c.geo_threshold_km ? inside : outside).push_back(w);
    for (std::size_t i = 0; i < std::min(count, inside.size()); ++i) {
        std::uniform_int_distribution<std::size_t> d(i, inside.size() - 1);
        std::swap(inside[i], inside[d(rng)]);
    }
    inside.resize(std::min(count, inside.size()));
    auto by_distance = [&](std::vector<const WorkerSnapshot*>& v) {
        std::stable_sort(v.begin(), v.end(), [&](const auto* a, const auto* b) { return km(a) < km(b); });
    };
    auto anchors = std::move(inside);
    by_distance(outside);
    for (const auto* w : outside) {
        if (anchors.size() >= count) break;
        anchors.push_back(w);
    }
    if (anchors.size() < count) {
        std::vector<const WorkerSnapshot*> rest;
        for (const auto& w : all) {
            if (std::find(survivors.begin(), survivors.end(), &w) == survivors.end()) rest.push_back(&w);
        }
        by_distance(rest);
        for (const auto* w : rest) {
            if (anchors.size() >= count) break;
            anchors.push_back(w);
        }
    }
    return anchors;
}

inline std::vector<const WorkerSnapshot*> ldp_stages(std::span<const WorkerSnapshot> workers, const TaskRequirements& t,
                                                     const PlacedMap& placed, const RttProbe& probe,
                                                     std::mt19937_64& rng, const LdpOptions& opt,
                                                     std::vector<UserEstimate>* estimates) {
    for (const auto& c : t.s2s_constraints) {
        if (!placed.count(c.target_microservice_id)) {
            throw DependencyUnplacedError("microservice " + std::to_string(c.target_microservice_id) +
                                          " is not placed yet");
        }
    }
    std::vector<const WorkerSnapshot*> w;
    for (const auto& n : workers) {
        if (resource_feasible(n, t)) w.push_back(&n);
    }

    for (const auto& c : t.s2s_constraints) {
        if (w.empty()) break;
        const auto& target = placed.at(c.target_microservice_id);
        std::erase_if(w, [&](const WorkerSnapshot* n) {
            return !(coords::dist_gc(n->geo, target.geo) <= c.geo_threshold_km &&
                     coords::dist_euc(n->vivaldi, target.vivaldi) <= c.latency_threshold_ms);
        });
    }

    for (const auto& c : t.s2u_constraints) {
        if (w.empty()) break;
        if (!probe) throw InvalidArgumentError("service-to-user constraint needs an rtt probe");
        UserEstimate est;
        est.user_endpoint = c.user_endpoint;
        std::vector<coords::RttSample> samples;
        for (const auto* a : pick_anchors(w, workers, static_cast<std::size_t>(c.probe_count), c, rng)) {
            const double rtt = median_ping(probe, *a, c.user_endpoint, opt.pings_per_probe);
            est.anchors.push_back(a->worker_id);
            est.rtts_ms.push_back(rtt);
            samples.push_back(coords::RttSample{a->vivaldi, rtt, 0});
        }
        est.user = coords::trilaterate(samples, opt.trilateration);
        std::erase_if(w, [&](const WorkerSnapshot* n) {
            return !(coords::dist_gc(n->geo, c.geo_target) <= c.geo_threshold_km &&
                     coords::dist_euc(n->vivaldi, est.user) <= c.latency_threshold_ms);
        });
        if (estimates) estimates->push_back(std::move(est));
    }
    return w;
}

}  // namespace detail

/// Latency and distance aware filtering. Survivors may be empty; stages after
/// the set empties are skipped.
inline LdpResult ldp_filter(std::span<const WorkerSnapshot> workers, const TaskRequirements& t, const PlacedMap& placed,
                            const RttProbe& probe, std::mt19937_64& rng, const LdpOptions& opt = {}) {
    LdpResult out;
    for (const auto* n : detail::ldp_stages(workers, t, placed, probe, rng, opt, &out.estimates)) {
        out.survivors.push_back(n->worker_id);
    }
    return out;
}

/// Filters with ldp_filter and picks the best-slack survivor.
inline core::WorkerId ldp_select(std::span<const WorkerSnapshot> workers, const TaskRequirements& t,
                                 const PlacedMap& placed, const RttProbe& probe, std::mt19937_64& rng,
                                 const LdpOptions& opt = {}) {
    const auto survivors = detail::ldp_stages(workers, t, placed, probe, rng, opt, nullptr);
    if (survivors.empty()) {
        throw NoFeasibleWorkerError("no worker satisfies the latency and distance constraints of task " +
                                    std::to_string(t.microservice_id));
    }
    return best_slack_of(survivors, t)->worker_id;
}

}  // namespace oak::scheduler
