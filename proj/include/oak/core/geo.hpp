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
#include <ostream>
#include <span>
#include <vector>

#include "oak/errors.hpp"

namespace oak::core {

/// A position on the earth's surface in degrees.
class GeoPoint {
public:
    GeoPoint() = default;
    GeoPoint(double latitude_deg, double longitude_deg)
        : lat_(latitude_deg), lon_(longitude_deg) {
        if (!(lat_ >= -90.0 && lat_ <= 90.0) || !(lon_ >= -180.0 && lon_ <= 180.0)) {
            throw InvalidArgumentError("geo point out of range");
        }
    }

    double latitude() const { return lat_; }
    double longitude() const { return lon_; }

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
    friend std::ostream& operator<<(std::ostream& os, const GeoPoint& p) {
        return os << "(" << p.lat_ << "," << p.lon_ << ")";
    }

private:
    double lat_ = 0.0;
    double lon_ = 0.0;
};

/// Convex polygon over (longitude, latitude), counter-clockwise. Zones are
/// small compared to the globe, so planar predicates on degrees suffice for
/// containment and overlap tests. Antimeridian-crossing zones are not
/// supported.
class GeoZone {
public:
    GeoZone() = default;

    /// Builds the convex hull of the given points.
    static GeoZone hull_of(std::span<const GeoPoint> points) {
        std::vector<GeoPoint> pts(points.begin(), points.end());
        std::sort(pts.begin(), pts.end(), [](const GeoPoint& a, const GeoPoint& b) {
            return a.longitude() < b.longitude() ||
                   (a.longitude() == b.longitude() && a.latitude() < b.latitude());
        });
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        GeoZone zone;
        if (pts.size() < 3) {
            zone.vertices_ = std::move(pts);
            return zone;
        }
        // Andrew's monotone chain.
        std::vector<GeoPoint> hull(2 * pts.size());
        std::size_t k = 0;
        for (const auto& p : pts) {
            while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
            hull[k++] = p;
        }
        for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
            const auto& p = pts[i];
            while (k >= t && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
            hull[k++] = p;
        }
        hull.resize(k - 1);
        zone.vertices_ = std::move(hull);
        return zone;
    }

    /// Accepts vertices in any order; the result is their hull.
    static GeoZone from_vertices(std::span<const GeoPoint> vertices) { return hull_of(vertices); }

    const std::vector<GeoPoint>& vertices() const { return vertices_; }
    bool empty() const { return vertices_.empty(); }

    bool contains(const GeoPoint& p) const {
        if (vertices_.empty()) return false;
        if (vertices_.size() == 1) return vertices_[0] == p;
        if (vertices_.size() == 2) {
            return std::abs(cross(vertices_[0], vertices_[1], p)) < 1e-12 &&
                   within_box(vertices_[0], vertices_[1], p);
        }
        for (std::size_t i = 0; i < vertices_.size(); ++i) {
            const auto& a = vertices_[i];
            const auto& b = vertices_[(i + 1) % vertices_.size()];
            if (cross(a, b, p) < -1e-12) return false;
        }
        return true;
    }

    /// Separating-axis test; degenerate zones (points, segments) included.
    bool intersects(const GeoZone& other) const {
        if (empty() || other.empty()) return false;
        return !has_separating_axis(*this, other) && !has_separating_axis(other, *this);
    }

    GeoPoint centroid() const {
        if (vertices_.empty()) throw InvalidArgumentError("centroid of empty zone");
        double lat = 0.0, lon = 0.0;
        for (const auto& v : vertices_) {
            lat += v.latitude();
            lon += v.longitude();
        }
        const auto n = static_cast<double>(vertices_.size());
        return GeoPoint(lat / n, lon / n);
    }

    friend bool operator==(const GeoZone&, const GeoZone&) = default;

private:
    static double cross(const GeoPoint& o, const GeoPoint& a, const GeoPoint& b) {
        return (a.longitude() - o.longitude()) * (b.latitude() - o.latitude()) -
               (a.latitude() - o.latitude()) * (b.longitude() - o.longitude());
    }

    static bool within_box(const GeoPoint& a, const GeoPoint& b, const GeoPoint& p) {
        return p.longitude() >= std::min(a.longitude(), b.longitude()) - 1e-12 &&
               p.longitude() <= std::max(a.longitude(), b.longitude()) + 1e-12 &&
               p.latitude() >= std::min(a.latitude(), b.latitude()) - 1e-12 &&
               p.latitude() <= std::max(a.latitude(), b.latitude()) + 1e-12;
    }

    static bool has_separating_axis(const GeoZone& a, const GeoZone& b) {
        const auto& va = a.vertices_;
        const std::size_t n = va.size();
        const std::size_t edges = n == 1 ? 0 : (n == 2 ? 2 : n);
        for (std::size_t i = 0; i < edges; ++i) {
            const auto& p = va[i % n];
            const auto& q = va[(i + 1) % n];
            // Edge normal in (lon, lat) space; for a segment try both normals.
            double nx = -(q.latitude() - p.latitude());
            double ny = q.longitude() - p.longitude();
            if (n == 2 && i == 1) {
                nx = q.longitude() - p.longitude();
                ny = q.latitude() - p.latitude();
            }
            auto [amin, amax] = project(a, nx, ny);
            auto [bmin, bmax] = project(b, nx, ny);
            if (amax < bmin - 1e-12 || bmax < amin - 1e-12) return true;
        }
        if (n == 1 && b.vertices_.size() == 1) return !(va[0] == b.vertices_[0]);
        return false;
    }

    static std::pair<double, double> project(const GeoZone& z, double nx, double ny) {
        double lo = INFINITY, hi = -INFINITY;
        for (const auto& v : z.vertices_) {
            const double d = v.longitude() * nx + v.latitude() * ny;
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
        return {lo, hi};
    }

    std::vector<GeoPoint> vertices_;
};

}  // namespace oak::core
