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
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "oak/coords/geodesy.hpp"
#include "oak/coords/vivaldi.hpp"
#include "oak/core/geo.hpp"
#include "oak/errors.hpp"

namespace oak::sim {

/// Square region the synthetic infrastructure is spread over.
struct Area {
    core::GeoPoint center{48.14, 11.58};
    double size_km = 3000.0;
};

struct PlantedConfig {
    double km_per_ms = 20.0;     // path inflation included
    double height_min_ms = 5.0;  // access-link delay of a server
    double height_max_ms = 15.0;
    double depth_ms = 5.0;       // third axis, uniform in [0, depth]
    double jitter = 0.0;         // relative, uniform in [-jitter, +jitter] per ping
};

/// Ground-truth latency space: every node has a 3D position in ms and a
/// height, and RTT(a, b) = |p_a - p_b| + h_a + h_b. Positions follow the
/// geographic layout, so nearby servers are also close in latency.
class PlantedNetwork {
public:
    struct Node {
        core::GeoPoint geo;
        std::array<double, 3> position{};
        double height = 0.0;
    };

    PlantedNetwork(Area area, PlantedConfig cfg, std::uint64_t seed) : area_(area), cfg_(cfg), rng_(seed) {}

    /// A server at a uniformly random spot of the area.
    const Node& add_server(const std::string& id) {
        std::uniform_real_distribution<double> u(-area_.size_km / 2, area_.size_km / 2);
        const double x = u(rng_), y = u(rng_);
        return add(id, unproject(x, y), draw_height(), draw_depth());
    }

    /// A node at a given location and height; the third axis is drawn.
    const Node& add(const std::string& id, const core::GeoPoint& geo, double height) {
        return add(id, geo, height, draw_depth());
    }

    /// A user within `max_km` of `near`, sitting on the edge (height 0).
    const Node& add_user_near(const std::string& id, const core::GeoPoint& near, double max_km) {
        std::uniform_real_distribution<double> bearing(0, 360), r(0, 1);
        const double d = max_km * std::sqrt(r(rng_));
        return add(id, coords::destination(near, bearing(rng_), d), 0.0, draw_depth());
    }

    bool contains(const std::string& id) const { return nodes_.contains(id); }
    const Node& node(const std::string& id) const {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw InvalidArgumentError("no planted node '" + id + "'");
        return it->second;
    }
    const std::map<std::string, Node>& nodes() const { return nodes_; }

    double rtt(const std::string& a, const std::string& b) const {
        if (a == b) return 0.0;
        const auto& p = node(a);
        const auto& q = node(b);
        double s = 0.0;
        for (int i = 0; i < 3; ++i) s += (p.position[i] - q.position[i]) * (p.position[i] - q.position[i]);
        return std::sqrt(s) + p.height + q.height;
    }

    /// One measured ping with jitter.
    double ping(const std::string& a, const std::string& b) {
        const double base = rtt(a, b);
        if (cfg_.jitter <= 0.0) return base;
        std::uniform_real_distribution<double> j(-cfg_.jitter, cfg_.jitter);
        return base * (1.0 + j(rng_));
    }

    /// The planted coordinate itself, for oracles.
    coords::VivaldiCoordinate truth(const std::string& id) const {
        const auto& n = node(id);
        return coords::VivaldiCoordinate{{n.position.begin(), n.position.end()}, n.height, 1.0};
    }

    const Area& area() const { return area_; }
    const PlantedConfig& config() const { return cfg_; }

private:
    const Node& add(const std::string& id, const core::GeoPoint& geo, double height, double depth) {
        Node n;
        n.geo = geo;
        const auto [x, y] = project(geo);
        n.position = {x / cfg_.km_per_ms, y / cfg_.km_per_ms, depth};
        n.height = height;
        return nodes_[id] = n;
    }

    double draw_height() {
        std::uniform_real_distribution<double> h(cfg_.height_min_ms, cfg_.height_max_ms);
        return h(rng_);
    }
    double draw_depth() {
        std::uniform_real_distribution<double> z(0, cfg_.depth_ms);
        return z(rng_);
    }

    // Equirectangular projection around the area center, in km.
    std::pair<double, double> project(const core::GeoPoint& g) const {
        const double k = std::numbers::pi / 180.0 * coords::kEarthRadiusKm;
        const double c = std::cos(area_.center.latitude() * std::numbers::pi / 180.0);
        return {(g.longitude() - area_.center.longitude()) * k * c, (g.latitude() - area_.center.latitude()) * k};
    }
    core::GeoPoint unproject(double x, double y) const {
        const double k = std::numbers::pi / 180.0 * coords::kEarthRadiusKm;
        const double c = std::cos(area_.center.latitude() * std::numbers::pi / 180.0);
        const double lat = std::clamp(area_.center.latitude() + y / k, -89.0, 89.0);
        double lon = area_.center.longitude() + x / (k * c);
        if (lon > 180) lon -= 360;
        if (lon < -180) lon += 360;
        return core::GeoPoint(lat, lon);
    }

    Area area_;
    PlantedConfig cfg_;
    std::mt19937_64 rng_;
    std::map<std::string, Node> nodes_;
};

struct WarmupConfig {
    int rounds = 64;
    int neighbours = 8;  // nearest by geography
    int random_peers = 4;
    coords::VivaldiConfig vivaldi;
};

/// Runs Vivaldi among `ids` against pings of the planted network and returns
/// the learned coordinates. Each round every node samples its geographic
/// neighbours plus a few random peers.
inline std::map<std::string, coords::VivaldiCoordinate> warm_up_vivaldi(PlantedNetwork& net,
                                                                        const std::vector<std::string>& ids,
                                                                        const WarmupConfig& cfg, std::uint64_t seed) {
    std::map<std::string, coords::VivaldiCoordinate> coord;
    for (const auto& id : ids) coord[id] = coords::VivaldiCoordinate::origin(cfg.vivaldi.dimensions);
    if (ids.size() < 2) return coord;
    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> near(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        std::vector<std::pair<double, std::size_t>> d;
        for (std::size_t j = 0; j < ids.size(); ++j) {
            if (j != i) d.emplace_back(coords::dist_gc(net.node(ids[i]).geo, net.node(ids[j]).geo), j);
        }
        const auto k = std::min<std::size_t>(static_cast<std::size_t>(cfg.neighbours), d.size());
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
        for (std::size_t n = 0; n < k; ++n) near[i].push_back(d[n].second);
    }
    std::uniform_int_distribution<std::size_t> any(0, ids.size() - 1);
    for (int r = 0; r < cfg.rounds; ++r) {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            auto peers = near[i];
            for (int k = 0; k < cfg.random_peers; ++k) {
                const auto j = any(rng);
                if (j != i) peers.push_back(j);
            }
            for (const auto j : peers) {
                const double rtt = std::max(net.ping(ids[i], ids[j]), 1e-3);
                coord[ids[i]] = coords::vivaldi_update(coord[ids[i]], coords::RttSample{coord[ids[j]], rtt, j + 1},
                                                       cfg.vivaldi, i + 1);
            }
        }
    }
    return coord;
}

}  // namespace oak::sim
