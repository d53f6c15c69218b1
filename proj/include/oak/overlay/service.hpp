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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oak/coords/vivaldi.hpp"
#include "oak/errors.hpp"
#include "oak/overlay/address.hpp"

namespace oak::overlay {

enum class Policy { instance, round_robin, closest };

inline const char* policy_name(Policy p) {
    switch (p) {
        case Policy::instance: return "instance";
        case Policy::round_robin: return "round_robin";
        case Policy::closest: return "closest";
    }
    return "?";
}

inline Policy parse_policy(const std::string& s) {
    if (s == "instance") return Policy::instance;
    if (s == "round_robin") return Policy::round_robin;
    if (s == "closest") return Policy::closest;
    throw UnknownPolicyError("'" + s + "'");
}

struct ServiceIP {
    Address address;
    Policy policy = Policy::round_robin;
    std::string service_id;

    friend bool operator==(const ServiceIP&, const ServiceIP&) = default;
};

/// One reachable instance of a service.
struct Binding {
    Address instance_ip;
    std::string node_endpoint;  // worker the instance runs on
    coords::VivaldiCoordinate vivaldi = coords::VivaldiCoordinate::origin();
    std::string instance_id;

    friend bool operator==(const Binding&, const Binding&) = default;
};

struct ResolveReply {
    Address query;
    std::string service_id;
    Policy policy = Policy::round_robin;
    std::vector<Binding> bindings;
    std::uint64_t version = 0;
};

/// The service manager's view: which serviceIPs exist and which instances
/// back them. Lives at the root; clusters keep cached replies.
class ServiceRegistry {
public:
    struct Record {
        std::string name;
        ServiceIP round_robin;
        ServiceIP closest;
        std::map<Address, Binding> instances;     // by instance ip
        std::map<Address, Address> instance_sips;  // instance ip -> its instance-policy serviceIP
        std::uint64_t version = 0;
    };

    const Record& ensure_service(const std::string& name) {
        auto it = services_.find(name);
        if (it != services_.end()) return it->second;
        if (name.empty() || name.find('.') != std::string::npos) {
            throw InvalidArgumentError("service names must be non-empty and contain no '.'");
        }
        Record r;
        r.name = name;
        r.round_robin = {ips_.allocate(), Policy::round_robin, name};
        r.closest = {ips_.allocate(), Policy::closest, name};
        by_sip_[r.round_robin.address] = {name, Policy::round_robin};
        by_sip_[r.closest.address] = {name, Policy::closest};
        return services_.emplace(name, std::move(r)).first->second;
    }

    /// Adds an instance and returns its instance-policy serviceIP.
    Address add_instance(const std::string& name, const Binding& b) {
        ensure_service(name);
        auto& r = services_.at(name);
        r.instances[b.instance_ip] = b;
        auto sip = r.instance_sips.find(b.instance_ip);
        if (sip == r.instance_sips.end()) {
            const auto a = ips_.allocate();
            sip = r.instance_sips.emplace(b.instance_ip, a).first;
            by_sip_[a] = {name, Policy::instance};
            instance_of_sip_[a] = b.instance_ip;
        }
        ++r.version;
        return sip->second;
    }

    bool remove_instance(const std::string& name, Address instance_ip) {
        auto it = services_.find(name);
        if (it == services_.end() || !it->second.instances.erase(instance_ip)) return false;
        ++it->second.version;
        return true;
    }

    /// Moves every instance hosted at `old_endpoint` to `new_endpoint`.
    std::vector<std::string> update_endpoint(const std::string& old_endpoint, const std::string& new_endpoint) {
        std::vector<std::string> touched;
        for (auto& [name, r] : services_) {
            bool changed = false;
            for (auto& [_, b] : r.instances) {
                if (b.node_endpoint == old_endpoint) {
                    b.node_endpoint = new_endpoint;
                    changed = true;
                }
            }
            if (changed) {
                ++r.version;
                touched.push_back(name);
            }
        }
        return touched;
    }

    const Record* find(const std::string& name) const {
        auto it = services_.find(name);
        return it == services_.end() ? nullptr : &it->second;
    }

    std::vector<Binding> bindings(const std::string& name) const {
        std::vector<Binding> out;
        if (const auto* r = find(name)) {
            for (const auto& [_, b] : r->instances) out.push_back(b);
        }
        return out;
    }

    /// Answers a resolution query for a serviceIP or an instance ip.
    std::optional<ResolveReply> lookup(Address a) const {
        if (auto it = by_sip_.find(a); it != by_sip_.end()) {
            const auto& [name, policy] = it->second;
            const auto& r = services_.at(name);
            ResolveReply reply{a, name, policy, {}, r.version};
            if (policy == Policy::instance) {
                const auto inst = r.instances.find(instance_of_sip_.at(a));
                if (inst != r.instances.end()) reply.bindings.push_back(inst->second);
            } else {
                for (const auto& [_, b] : r.instances) reply.bindings.push_back(b);
            }
            return reply;
        }
        for (const auto& [name, r] : services_) {
            if (auto inst = r.instances.find(a); inst != r.instances.end()) {
                return ResolveReply{a, name, Policy::instance, {inst->second}, r.version};
            }
        }
        return std::nullopt;
    }

    /// Resolves "<service>.<policy>" to a serviceIP.
    Address resolve_name(const std::string& qualified) const {
        const auto dot = qualified.rfind('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 == qualified.size()) {
            throw UnknownNameError("'" + qualified + "' is not <service>.<policy>");
        }
        const auto policy = parse_policy(qualified.substr(dot + 1));
        const auto* r = find(qualified.substr(0, dot));
        if (!r) throw UnknownNameError("no service '" + qualified.substr(0, dot) + "'");
        switch (policy) {
            case Policy::round_robin: return r->round_robin.address;
            case Policy::closest: return r->closest.address;
            case Policy::instance:
                if (r->instances.empty()) throw UnknownNameError("'" + qualified + "' has no instances");
                return r->instance_sips.at(r->instances.begin()->first);
        }
        throw UnknownNameError(qualified);
    }

    std::vector<std::string> services() const {
        std::vector<std::string> out;
        for (const auto& [n, _] : services_) out.push_back(n);
        return out;
    }

private:
    ServiceIpAllocator ips_;
    std::map<std::string, Record> services_;
    std::map<Address, std::pair<std::string, Policy>> by_sip_;
    std::map<Address, Address> instance_of_sip_;
};

}  // namespace oak::overlay
