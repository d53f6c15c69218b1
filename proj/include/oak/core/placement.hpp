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

#include <ostream>
#include <string>
#include <vector>

#include "oak/core/model.hpp"

namespace oak::core {

/// Where a task ended up.
struct Placement {
    WorkerId worker_id;
    std::vector<ClusterId> cluster_path;  // top-level cluster down to the owning cluster
    Millis decided_at = 0;

    const ClusterId& cluster() const { return cluster_path.back(); }

    friend bool operator==(const Placement&, const Placement&) = default;
    friend std::ostream& operator<<(std::ostream& os, const Placement& p) {
        os << p.worker_id << "@";
        for (std::size_t i = 0; i < p.cluster_path.size(); ++i) os << (i ? "/" : "") << p.cluster_path[i];
        return os;
    }
};

}  // namespace oak::core
