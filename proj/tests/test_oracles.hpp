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

// Test-only reference implementations. Nothing here calls into the code paths
// it is used to check; geometry is recomputed from first principles.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <list>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "oak/coords/vivaldi.hpp"
#include "oak/core/model.hpp"
#include "oak/core/sla.hpp"

namespace testing_oracles {

/// Great-circle distance via the angle between unit vectors (atan2 form).
inline double great_circle_km(double lat1, double lon1, double lat2, double lon2) {
    const double k = std::numbers::pi / 180.0;
    auto unit = [&](double lat, double lon) {
        return std::array<double, 3>{std::cos(lat * k) * std::cos(lon * k), std::cos(lat * k) * std::sin(lon * k),
                                     std::sin(lat * k)};
    };
    const auto a = unit(lat1, lon1);
    const auto b = unit(lat2, lon2);
    const std::array<double, 3> c = {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
    const double cross = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
    const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    return 6371.0 * std::atan2(cross, dot);
}

/// Euclidean distance plus heights, written out independently.
inline double embedded_rtt(const std::vector<double>& a, double ha, const std::vector<double>& b, double hb) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s) + ha + hb;
}

/// Nodes at planted 3D positions; RTT is their exact Euclidean distance.
struct PlantedNetwork {
    std::vector<std::vector<double>> pos;

    static PlantedNetwork uniform(int n, double side, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, side);
        PlantedNetwork net;
        for (int i = 0; i < n; ++i) net.pos.push_back({u(rng), u(rng), u(rng)});
        return net;
    }

    double rtt(std::size_t i, std::size_t j) const { return embedded_rtt(pos[i], 0.0, pos[j], 0.0); }
    std::size_t size() const { return pos.size(); }
};

/// One Vivaldi round: every node updates once against a uniformly random peer.
inline void vivaldi_round(const PlantedNetwork& net, std::vector<oak::coords::VivaldiCoordinate>& coords,
                          std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, net.size() - 1);
    for (std::size_t i = 0; i < net.size(); ++i) {
        std::size_t j = pick(rng);
        while (j == i) j = pick(rng);
        coords[i] = oak::coords::vivaldi_update(coords[i], {coords[j], net.rtt(i, j), j}, {}, i);
    }
}

inline double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

inline double percentile(std::vector<double> xs, double p) {
    std::sort(xs.begin(), xs.end());
    const double idx = p * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(idx));
    const auto hi = static_cast<std::size_t>(std::ceil(idx));
    return xs[lo] + (xs[hi] - xs[lo]) * (idx - static_cast<double>(lo));
}

/// Reference LRU over active links: a recency list capped at k.
class ReferenceLru {
public:
    explicit ReferenceLru(std::size_t k) : k_(k) {}

    /// Returns the demoted peer, if any.
    std::optional<std::string> open(const std::string& peer) {
        known_.insert(peer);
        auto it = std::find(active_.begin(), active_.end(), peer);
        if (it != active_.end()) {
            active_.erase(it);
            active_.push_back(peer);
            return std::nullopt;
        }
        std::optional<std::string> demoted;
        if (active_.size() == k_) {
            demoted = active_.front();
            active_.pop_front();
        }
        active_.push_back(peer);
        return demoted;
    }

    std::set<std::string> active() const { return {active_.begin(), active_.end()}; }
    std::set<std::string> configured() const {
        std::set<std::string> out;
        for (const auto& p : known_) {
            if (std::find(active_.begin(), active_.end(), p) == active_.end()) out.insert(p);
        }
        return out;
    }

private:
    std::size_t k_;
    std::list<std::string> active_;
    std::set<std::string> known_;
};

/// Exhaustive resource-only scan written against raw fields.
inline std::optional<std::string> rom_oracle(const std::vector<oak::core::WorkerSnapshot>& ws,
                                             const oak::core::TaskRequirements& t, bool best_slack) {
    std::optional<std::string> pick;
    double best = 0;
    for (const auto& w : ws) {
        const double cpu = w.capacity.cpu_cores - w.used.cpu_cores - t.capacity.cpu_cores;
        const double mem = static_cast<double>(w.capacity.memory_mb - w.used.memory_mb - t.capacity.memory_mb);
        const bool gpu = w.capacity.gpu_units - w.used.gpu_units >= t.capacity.gpu_units;
        const bool tpu = w.capacity.tpu_units - w.used.tpu_units >= t.capacity.tpu_units;
        const bool bw = w.capacity.bandwidth_in_mbps - w.used.bandwidth_in_mbps >= t.capacity.bandwidth_in_mbps;
        const bool virt = std::find(w.virtualizations.begin(), w.virtualizations.end(), t.virtualization) !=
                          w.virtualizations.end();
        if (!(cpu >= 0 && mem >= 0 && gpu && tpu && bw && virt)) continue;
        if (!best_slack) return w.worker_id;
        const double score = cpu + mem;
        if (!pick || score > best || (score == best && w.worker_id < *pick)) {
            pick = w.worker_id;
            best = score;
        }
    }
    return pick;
}

/// A service-to-user target as the oracle sees it: the user coordinate the
/// filter is supposed to have used.
struct OracleUser {
    double lat, lon, geo_thr_km, lat_thr_ms;
    std::vector<double> pos;
    double height;
};

struct OraclePlaced {
    double lat, lon;
    std::vector<double> pos;
    double height;
    double geo_thr_km, lat_thr_ms;
};

/// Exhaustive latency/distance filter over raw coordinates.
inline std::set<std::string> ldp_oracle(const std::vector<oak::core::WorkerSnapshot>& ws,
                                        const oak::core::TaskRequirements& t, const std::vector<OraclePlaced>& s2s,
                                        const std::vector<OracleUser>& s2u) {
    std::set<std::string> out;
    for (const auto& w : ws) {
        const double cpu = w.capacity.cpu_cores - w.used.cpu_cores - t.capacity.cpu_cores;
        const double mem = static_cast<double>(w.capacity.memory_mb - w.used.memory_mb - t.capacity.memory_mb);
        const bool virt = w.virtualizations.count(t.virtualization) != 0;
        if (!(cpu >= 0 && mem >= 0 && virt)) continue;
        bool ok = true;
        for (const auto& c : s2s) {
            ok = ok && great_circle_km(w.geo.latitude(), w.geo.longitude(), c.lat, c.lon) <= c.geo_thr_km &&
                 embedded_rtt(w.vivaldi.position, w.vivaldi.height, c.pos, c.height) <= c.lat_thr_ms;
        }
        for (const auto& u : s2u) {
            ok = ok && great_circle_km(w.geo.latitude(), w.geo.longitude(), u.lat, u.lon) <= u.geo_thr_km &&
                 embedded_rtt(w.vivaldi.position, w.vivaldi.height, u.pos, u.height) <= u.lat_thr_ms;
        }
        if (ok) out.insert(w.worker_id);
    }
    return out;
}

}  // namespace testing_oracles
