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
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "oak/errors.hpp"

namespace oak::coords {

/// Tuning constants of the Vivaldi update rule.
struct VivaldiConfig {
    std::size_t dimensions = 3;
    double cc = 0.25;            // position timestep scale
    double ce = 0.25;            // error EWMA scale
    double height_min_ms = 0.01; // heights never collapse below this once updated
    double error_min = 1e-6;
};

/// A network coordinate: Euclidean position plus a non-negative height, all in
/// milliseconds of round-trip time. Distances between coordinates predict RTT.
struct VivaldiCoordinate {
    std::vector<double> position;
    double height = 0.0;
    double error_estimate = 1.0;

    static VivaldiCoordinate origin(std::size_t dims = 3) {
        return VivaldiCoordinate{std::vector<double>(dims, 0.0), 0.0, 1.0};
    }

    std::size_t dimensions() const { return position.size(); }

    bool valid() const {
        if (!(error_estimate > 0.0 && error_estimate <= 1.0)) return false;
        if (!(height >= 0.0) || !std::isfinite(height)) return false;
        return std::all_of(position.begin(), position.end(), [](double x) { return std::isfinite(x); });
    }

    friend bool operator==(const VivaldiCoordinate&, const VivaldiCoordinate&) = default;

    friend std::ostream& operator<<(std::ostream& os, const VivaldiCoordinate& c) {
        os << "[";
        for (std::size_t i = 0; i < c.position.size(); ++i) os << (i ? "," : "") << c.position[i];
        return os << " h=" << c.height << " e=" << c.error_estimate << "]";
    }
};

struct RttSample {
    VivaldiCoordinate peer_coordinate;
    double measured_rtt_ms = 0.0;
    std::uint64_t peer_id = 0;
};

inline double position_norm(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) {
        throw DimensionMismatchError("coordinates have " + std::to_string(a.size()) + " and " +
                                     std::to_string(b.size()) + " dimensions");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

/// Predicted RTT: Euclidean norm of the position difference plus both heights.
inline double dist_euc(const VivaldiCoordinate& a, const VivaldiCoordinate& b) {
    return position_norm(a.position, b.position) + a.height + b.height;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Unit vector derived only from the two node ids, so coincident nodes push
/// apart the same way on every run.
inline std::vector<double> seeded_direction(std::size_t dims, std::uint64_t self_id, std::uint64_t peer_id) {
    std::uint64_t state = self_id * 0x100000001B3ULL ^ (peer_id + 0x632BE59BD9B4E019ULL);
    std::vector<double> v(dims, 0.0);
    double norm = 0.0;
    while (norm < 1e-9) {
        norm = 0.0;
        for (auto& x : v) {
            const auto bits = splitmix64(state) >> 11;
            x = static_cast<double>(bits) / static_cast<double>(1ULL << 53) * 2.0 - 1.0;
            norm += x * x;
        }
        norm = std::sqrt(norm);
    }
    for (auto& x : v) x /= norm;
    return v;
}

}  // namespace detail

/// One Vivaldi step of `self` against a single RTT observation.
///
/// The weight w = e_self / (e_self + e_peer) scales both the position step
/// (delta = cc * w, force = delta * (rtt - predicted)) and the error EWMA
/// (alpha = ce * w over the relative prediction error). The height moves in
/// proportion to its share of the predicted distance.
inline VivaldiCoordinate vivaldi_update(const VivaldiCoordinate& self, const RttSample& sample,
                                        const VivaldiConfig& cfg = {}, std::uint64_t self_id = 0) {
    const auto& peer = sample.peer_coordinate;
    if (!(sample.measured_rtt_ms > 0.0)) throw InvalidArgumentError("measured rtt must be positive");
    const double rtt = sample.measured_rtt_ms;
    const double predicted = dist_euc(self, peer);

    const double total_error = self.error_estimate + peer.error_estimate;
    const double w = total_error > 0.0 ? self.error_estimate / total_error : 0.5;
    const double relative = std::abs(predicted - rtt) / rtt;

    VivaldiCoordinate next = self;
    const double alpha = cfg.ce * w;
    next.error_estimate =
        std::clamp(alpha * relative + self.error_estimate * (1.0 - alpha), cfg.error_min, 1.0);

    const double delta = cfg.cc * w;
    const double force = delta * (rtt - predicted);
    if (force == 0.0) return next;

    const double mag = position_norm(self.position, peer.position);
    std::vector<double> unit(self.position.size(), 0.0);
    if (mag > 1e-9) {
        for (std::size_t i = 0; i < unit.size(); ++i) unit[i] = (self.position[i] - peer.position[i]) / mag;
    } else {
        unit = detail::seeded_direction(unit.size(), self_id, sample.peer_id);
    }
    for (std::size_t i = 0; i < unit.size(); ++i) next.position[i] += unit[i] * force;

    if (mag > 1e-9) {
        next.height = std::max((self.height + peer.height) * force / mag + self.height, cfg.height_min_ms);
    }
    return next;
}

}  // namespace oak::coords
