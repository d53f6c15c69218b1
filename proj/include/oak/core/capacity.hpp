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

#include <array>
#include <cstdint>
#include <ostream>
#include <string_view>

#include "oak/errors.hpp"

namespace oak::core {

/// Capacity dimensions that are aggregated and reported upward.
enum class Dim : std::uint8_t { cpu = 0, memory = 1, gpu = 2, tpu = 3 };

inline constexpr std::array<Dim, 4> kAggregatedDims = {Dim::cpu, Dim::memory, Dim::gpu, Dim::tpu};

constexpr std::string_view dim_name(Dim d) {
    switch (d) {
        case Dim::cpu: return "cpu";
        case Dim::memory: return "memory";
        case Dim::gpu: return "gpu";
        case Dim::tpu: return "tpu";
    }
    return "?";
}

/// Resource amounts of a worker or a task. Used for maximum capacity,
/// current utilization and availability alike.
struct CapacityVector {
    double cpu_cores = 0.0;             // virtual cores
    std::int64_t memory_mb = 0;         // MiB
    std::int64_t gpu_units = 0;
    std::int64_t tpu_units = 0;
    std::int64_t bandwidth_in_mbps = 0;

    double get(Dim d) const {
        switch (d) {
            case Dim::cpu: return cpu_cores;
            case Dim::memory: return static_cast<double>(memory_mb);
            case Dim::gpu: return static_cast<double>(gpu_units);
            case Dim::tpu: return static_cast<double>(tpu_units);
        }
        return 0.0;
    }

    bool non_negative() const {
        return cpu_cores >= 0.0 && memory_mb >= 0 && gpu_units >= 0 && tpu_units >= 0 &&
               bandwidth_in_mbps >= 0;
    }

    bool is_zero() const {
        return cpu_cores == 0.0 && memory_mb == 0 && gpu_units == 0 && tpu_units == 0 &&
               bandwidth_in_mbps == 0;
    }

    /// True if every component of `need` fits into this vector.
    bool covers(const CapacityVector& need) const {
        return need.cpu_cores <= cpu_cores && need.memory_mb <= memory_mb &&
               need.gpu_units <= gpu_units && need.tpu_units <= tpu_units &&
               need.bandwidth_in_mbps <= bandwidth_in_mbps;
    }

    CapacityVector& operator+=(const CapacityVector& o) {
        cpu_cores += o.cpu_cores;
        memory_mb += o.memory_mb;
        gpu_units += o.gpu_units;
        tpu_units += o.tpu_units;
        bandwidth_in_mbps += o.bandwidth_in_mbps;
        return *this;
    }

    friend CapacityVector operator+(CapacityVector a, const CapacityVector& b) { return a += b; }

    friend bool operator==(const CapacityVector&, const CapacityVector&) = default;

    friend std::ostream& operator<<(std::ostream& os, const CapacityVector& c) {
        return os << "{cpu=" << c.cpu_cores << ", mem=" << c.memory_mb << "MB, gpu=" << c.gpu_units
                  << ", tpu=" << c.tpu_units << ", bw=" << c.bandwidth_in_mbps << "Mbps}";
    }
};

inline constexpr double kCpuEpsilon = 1e-9;

/// Componentwise `minuend - subtrahend`. Never clamps: a negative component
/// means the inputs are inconsistent and is reported as UnderflowError.
inline CapacityVector checked_sub(const CapacityVector& minuend, const CapacityVector& subtrahend) {
    CapacityVector out{
        minuend.cpu_cores - subtrahend.cpu_cores,
        minuend.memory_mb - subtrahend.memory_mb,
        minuend.gpu_units - subtrahend.gpu_units,
        minuend.tpu_units - subtrahend.tpu_units,
        minuend.bandwidth_in_mbps - subtrahend.bandwidth_in_mbps,
    };
    // Fractional cores accumulate rounding noise; anything beyond it is real.
    if (out.cpu_cores < 0.0 && out.cpu_cores > -kCpuEpsilon) out.cpu_cores = 0.0;
    if (!out.non_negative()) {
        throw UnderflowError("capacity component would become negative");
    }
    return out;
}

}  // namespace oak::core
