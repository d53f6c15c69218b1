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

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oak/coords/vivaldi.hpp"
#include "oak/errors.hpp"
#include "oak/overlay/service.hpp"

namespace oak::overlay {

struct ResolutionEntry {
    std::string service_id;
    Policy policy = Policy::instance;
    std::vector<Binding> instances;
    std::size_t rr_cursor = 0;
    bool resolved = false;
    std::uint64_t version = 0;
};

/// Per-worker map from serviceIPs (and instance ips) to instances. Remote
/// entries start unresolved and fill in on demand.
class ConversionTable {
public:
    explicit ConversionTable(coords::VivaldiCoordinate local = coords::VivaldiCoordinate::origin())
        : local_(std::move(local)) {}

    void set_local_coordinate(const coords::VivaldiCoordinate& c) { local_ = c; }
    const coords::VivaldiCoordinate& local_coordinate() const { return local_; }

    /// Entry for an instance running on this worker; resolved from the start.
    void add_local(const std::string& service_id, const Binding& b) {
        auto& e = entries_[b.instance_ip];
        e.service_id = service_id;
        e.policy = Policy::instance;
        e.instances = {b};
        e.rr_cursor = 0;
        e.resolved = true;
    }

    void remove_local(Address instance_ip) { entries_.erase(instance_ip); }

    /// Records an address the worker may talk to, unresolved.
    void declare(Address a) { entries_.try_emplace(a); }

    const ResolutionEntry* find(Address a) const {
        auto it = entries_.find(a);
        return it == entries_.end() ? nullptr : &it->second;
    }

    bool resolved(Address a) const {
        const auto* e = find(a);
        return e && e->resolved;
    }

    /// Stores a reply and subscribes to its service.
    void install(const ResolveReply& reply) {
        auto& e = entries_[reply.query];
        e.service_id = reply.service_id;
        e.policy = reply.policy;
        e.instances = reply.bindings;
        e.version = reply.version;
        e.resolved = true;
        clamp(e);
        subscriptions_.insert(reply.service_id);
    }

    void invalidate(Address a) {
        if (auto it = entries_.find(a); it != entries_.end()) it->second.resolved = false;
    }

    bool subscribed(const std::string& service_id) const { return subscriptions_.count(service_id) != 0; }
    const std::set<std::string>& subscriptions() const { return subscriptions_; }

    /// Replaces the bindings of every entry of `service_id`. Ignored for
    /// services this worker never resolved and for versions already seen.
    bool push_update(const std::string& service_id, const std::vector<Binding>& bindings, std::uint64_t version) {
        if (!subscribed(service_id)) return false;
        bool applied = false;
        for (auto& [addr, e] : entries_) {
            if (e.service_id != service_id || !e.resolved || e.version >= version) continue;
            if (e.policy == Policy::instance) {
                // Pinned to one instance: keep it only while it is still bound.
                const Address pinned = e.instances.empty() ? addr : e.instances.front().instance_ip;
                std::vector<Binding> kept;
                for (const auto& b : bindings) {
                    if (b.instance_ip == pinned) kept.push_back(b);
                }
                e.instances = std::move(kept);
            } else {
                e.instances = bindings;
            }
            e.version = version;
            clamp(e);
            applied = true;
        }
        return applied;
    }

    /// Applies the entry's policy. nullopt when the entry is missing or
    /// unresolved; UnresolvableError when it resolved to nothing.
    std::optional<Binding> pick(Address a) {
        auto it = entries_.find(a);
        if (it == entries_.end() || !it->second.resolved) return std::nullopt;
        auto& e = it->second;
        if (e.instances.empty()) throw UnresolvableError(a.str() + " has no instances");
        switch (e.policy) {
            case Policy::instance: return e.instances.front();
            case Policy::round_robin: {
                const auto b = e.instances[e.rr_cursor];
                e.rr_cursor = (e.rr_cursor + 1) % e.instances.size();
                return b;
            }
            case Policy::closest: {
                const Binding* best = nullptr;
                double best_d = 0.0;
                for (const auto& b : e.instances) {
                    const double d = coords::dist_euc(local_, b.vivaldi);
                    if (!best || d < best_d || (d == best_d && b.instance_ip < best->instance_ip)) {
                        best = &b;
                        best_d = d;
                    }
                }
                return *best;
            }
        }
        return std::nullopt;
    }

    const std::map<Address, ResolutionEntry>& entries() const { return entries_; }

private:
    static void clamp(ResolutionEntry& e) { e.rr_cursor = e.instances.empty() ? 0 : e.rr_cursor % e.instances.size(); }

    coords::VivaldiCoordinate local_;
    std::map<Address, ResolutionEntry> entries_;
    std::set<std::string> subscriptions_;
};

/// Asks the orchestrator about an address; `force` bypasses its caches.
using Resolver = std::function<std::optional<ResolveReply>(Address, bool force)>;

/// Resolves through the table, querying `resolver` on a miss. A NetworkError
/// from the first query is retried once with a forced refresh.
inline Binding resolve(ConversionTable& table, Address a, const Resolver& resolver, std::size_t* queries = nullptr) {
    if (!a.is_service_ip() && !a.is_instance_ip()) throw AddressFormatError(a.str() + " is not an overlay address");
    if (!table.resolved(a)) {
        std::optional<ResolveReply> reply;
        try {
            if (queries) ++*queries;
            reply = resolver(a, false);
        } catch (const NetworkError&) {
            if (queries) ++*queries;
            reply = resolver(a, true);
        }
        if (!reply) throw UnresolvableError(a.str());
        table.install(*reply);
    }
    return *table.pick(a);
}

}  // namespace oak::overlay
