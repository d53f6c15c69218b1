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
#include <ostream>
#include <set>
#include <string>

#include "oak/errors.hpp"

namespace oak::overlay {

/// 32-bit overlay address.
///
/// Instance addresses live in 10.0.0.0/8 and are laid out as
///   [8 bits: 10][8 bits: cluster index][10 bits: worker subnet][6 bits: instance suffix]
/// so every worker owns a /26. Semantic serviceIPs are drawn from 172.30.0.0/16.
struct Address {
    std::uint32_t value = 0;

    static constexpr std::uint32_t kInstancePrefix = 10u << 24;
    static constexpr std::uint32_t kServicePrefix = (172u << 24) | (30u << 16);
    static constexpr int kWorkerBits = 10;
    static constexpr int kSuffixBits = 6;
    static constexpr std::uint32_t kMaxWorkerSubnets = 1u << kWorkerBits;
    static constexpr std::uint32_t kMaxSuffix = (1u << kSuffixBits) - 2;  // .0 network, last broadcast

    bool is_service_ip() const { return (value & 0xFFFF0000u) == kServicePrefix; }
    bool is_instance_ip() const { return (value & 0xFF000000u) == kInstancePrefix; }

    std::string str() const {
        return std::to_string(value >> 24) + "." + std::to_string((value >> 16) & 0xFF) + "." +
               std::to_string((value >> 8) & 0xFF) + "." + std::to_string(value & 0xFF);
    }

    static Address parse(const std::string& s) {
        std::uint32_t out = 0;
        int parts = 0;
        std::size_t pos = 0;
        bool at_end = false;
        while (parts < 4) {
            const auto dot = s.find('.', pos);
            const auto tok = s.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
            if (tok.empty() || tok.size() > 3 || tok.find_first_not_of("0123456789") != std::string::npos) {
                throw AddressFormatError("'" + s + "'");
            }
            const auto octet = std::stoul(tok);
            if (octet > 255) throw AddressFormatError("'" + s + "'");
            out = (out << 8) | static_cast<std::uint32_t>(octet);
            ++parts;
            if (dot == std::string::npos) {
                at_end = true;
                break;
            }
            pos = dot + 1;
        }
        if (parts != 4 || !at_end) throw AddressFormatError("'" + s + "'");
        return Address{out};
    }

    auto operator<=>(const Address&) const = default;
    friend std::ostream& operator<<(std::ostream& os, const Address& a) { return os << a.str(); }
};

/// The /26 assigned to one worker.
struct WorkerSubnet {
    std::uint32_t cluster_index = 0;
    std::uint32_t index = 0;  // position in the cluster's pool

    Address base() const {
        return Address{Address::kInstancePrefix | (cluster_index << 16) | (index << Address::kSuffixBits)};
    }
    Address host(std::uint32_t suffix) const { return Address{base().value | suffix}; }
    bool contains(Address a) const { return (a.value & ~((1u << Address::kSuffixBits) - 1)) == base().value; }
    std::string str() const { return base().str() + "/26"; }

    friend bool operator==(const WorkerSubnet&, const WorkerSubnet&) = default;
};

/// Hands out worker subnets of one cluster; an index is never reissued.
class SubnetAllocator {
public:
    explicit SubnetAllocator(std::uint32_t cluster_index) : cluster_index_(cluster_index) {
        if (cluster_index > 255) throw InvalidArgumentError("cluster index must fit in 8 bits");
    }

    WorkerSubnet allocate() {
        if (next_ >= Address::kMaxWorkerSubnets) throw SubnetExhaustedError("cluster subnet pool exhausted");
        return WorkerSubnet{cluster_index_, next_++};
    }

    std::uint32_t cluster_index() const { return cluster_index_; }
    std::uint32_t allocated() const { return next_; }

private:
    std::uint32_t cluster_index_;
    std::uint32_t next_ = 0;
};

/// Instance addresses within one worker subnet. Suffixes rotate forward so a
/// released address is not handed out again until the pool wraps.
class InstanceAddressPool {
public:
    InstanceAddressPool() = default;
    explicit InstanceAddressPool(WorkerSubnet subnet) : subnet_(subnet) {}

    Address allocate() {
        if (in_use_.size() >= Address::kMaxSuffix) throw SubnetExhaustedError("worker subnet " + subnet_.str() + " is full");
        for (std::uint32_t i = 0; i < Address::kMaxSuffix; ++i) {
            const std::uint32_t suffix = 1 + (cursor_ + i) % Address::kMaxSuffix;
            if (!in_use_.count(suffix)) {
                in_use_.insert(suffix);
                cursor_ = suffix % Address::kMaxSuffix;
                return subnet_.host(suffix);
            }
        }
        throw SubnetExhaustedError("worker subnet " + subnet_.str() + " is full");
    }

    void release(Address a) { in_use_.erase(a.value & ((1u << Address::kSuffixBits) - 1)); }
    const WorkerSubnet& subnet() const { return subnet_; }
    std::size_t in_use() const { return in_use_.size(); }

private:
    WorkerSubnet subnet_{};
    std::set<std::uint32_t> in_use_;
    std::uint32_t cursor_ = 0;
};

/// Hands out semantic serviceIPs.
class ServiceIpAllocator {
public:
    Address allocate() {
        if (next_ > 0xFFFE) throw SubnetExhaustedError("serviceIP space exhausted");
        return Address{Address::kServicePrefix | next_++};
    }

private:
    std::uint32_t next_ = 1;
};

}  // namespace oak::overlay
