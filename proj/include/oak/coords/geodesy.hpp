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
#include <numbers>

#include "oak/core/geo.hpp"

namespace oak::coords {

inline constexpr double kEarthRadiusKm = 6371.0;

/// Great-circle distance in km (haversine on a sphere of radius 6371 km).
inline double dist_gc(const core::GeoPoint& a, const core::GeoPoint& b) {
    constexpr double to_rad = std::numbers::pi / 180.0;
    const double lat1 = a.latitude() * to_rad;
    const double lat2 = b.latitude() * to_rad;
    const double dlat = lat2 - lat1;
    const double dlon = (b.longitude() - a.longitude()) * to_rad;
    const double s1 = std::sin(dlat / 2.0);
    const double s2 = std::sin(dlon / 2.0);
    double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
    h = std::clamp(h, 0.0, 1.0);
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

/// Point reached after travelling `distance_km` from `origin` along
/// `bearing_deg` (clockwise from north). Used to plant synthetic topologies.
inline core::GeoPoint destination(const core::GeoPoint& origin, double bearing_deg, double distance_km) {
    constexpr double to_rad = std::numbers::pi / 180.0;
    const double delta = distance_km / kEarthRadiusKm;
    const double theta = bearing_deg * to_rad;
    const double lat1 = origin.latitude() * to_rad;
    const double lon1 = origin.longitude() * to_rad;
    const double lat2 = std::asin(std::sin(lat1) * std::cos(delta) +
                                  std::cos(lat1) * std::sin(delta) * std::cos(theta));
    double lon2 = lon1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(lat1),
                                    std::cos(delta) - std::sin(lat1) * std::sin(lat2));
    double lon_deg = lon2 / to_rad;
    while (lon_deg > 180.0) lon_deg -= 360.0;
    while (lon_deg < -180.0) lon_deg += 360.0;
    return core::GeoPoint(std::clamp(lat2 / to_rad, -90.0, 90.0), lon_deg);
}

}  // namespace oak::coords
