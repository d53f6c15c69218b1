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
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "oak/core/model.hpp"
#include "oak/errors.hpp"
#include "oak/overlay/table.hpp"
#include "oak/overlay/tunnel.hpp"

namespace oak::overlay {

struct Packet {
    Address src_instance_ip;
    Address dst_address;  // serviceIP or instance ip
    std::vector<std::uint8_t> payload;
};

struct DeliveryRecord {
    Address src_instance_ip;
    Address dst_address;
    Binding target;
    bool loopback = false;
    bool refreshed = false;  // delivered only after a forced table refresh
    std::uint32_t seq = 0;
};

/// Carries encapsulated datagrams between worker proxies. send() throws
/// PeerUnreachableError when the datagram cannot be handed over.
class DataPlane {
public:
    virtual ~DataPlane() = default;
    virtual void send(const std::string& from, const std::string& to, std::vector<std::uint8_t> datagram) = 0;
};

/// The per-worker network proxy: conversion table, tunnel ledger and the
/// local end of every tunnel.
class Proxy {
public:
    Proxy(std::string endpoint, std::size_t k, DataPlane& data_plane, Resolver resolver = {},
          core::Millis idle_gc_ms = 60000)
        : endpoint_(std::move(endpoint)), tunnels_(endpoint_, k, idle_gc_ms), data_plane_(&data_plane),
          resolver_(std::move(resolver)) {}

    const std::string& endpoint() const { return endpoint_; }
    ConversionTable& table() { return table_; }
    const ConversionTable& table() const { return table_; }
    TunnelSet& tunnels() { return tunnels_; }
    const TunnelSet& tunnels() const { return tunnels_; }
    void set_resolver(Resolver r) { resolver_ = std::move(r); }

    void add_local(const std::string& service_id, const Binding& b) {
        table_.add_local(service_id, b);
        local_[b.instance_ip] = b.instance_id;
    }
    void remove_local(Address instance_ip) {
        table_.remove_local(instance_ip);
        local_.erase(instance_ip);
    }
    bool hosts(Address instance_ip) const { return local_.count(instance_ip) != 0; }

    /// Resolves synchronously through the resolver and delivers. On an
    /// unreachable peer the entry is refreshed and delivery retried once.
    DeliveryRecord forward(const Packet& p, core::Millis now) {
        require_local(p.src_instance_ip);
        auto target = resolve(table_, p.dst_address, resolver_, &queries_);
        try {
            return deliver(p, target, now, false);
        } catch (const PeerUnreachableError&) {
            table_.invalidate(p.dst_address);
            ++queries_;
            auto reply = resolver_ ? resolver_(p.dst_address, true) : std::nullopt;
            if (!reply) throw UnresolvableError(p.dst_address.str());
            table_.install(*reply);
            target = *table_.pick(p.dst_address);
            return deliver(p, target, now, true);
        }
    }

    /// Delivers only if the destination is already resolved; nullopt means a
    /// resolution query is needed first. Unreachable peers invalidate the entry.
    std::optional<DeliveryRecord> try_forward(const Packet& p, core::Millis now) {
        require_local(p.src_instance_ip);
        auto target = table_.pick(p.dst_address);
        if (!target) return std::nullopt;
        try {
            return deliver(p, *target, now, false);
        } catch (const PeerUnreachableError&) {
            table_.invalidate(p.dst_address);
            throw;
        }
    }

    /// Receiving end: hands the payload to a local instance.
    void receive(std::span<const std::uint8_t> datagram) {
        auto [h, payload] = decapsulate(datagram);
        if (!hosts(h.dst_instance_ip)) {
            throw PeerUnreachableError(h.dst_instance_ip.str() + " is not hosted on " + endpoint_);
        }
        ++received_[h.dst_instance_ip];
    }

    std::size_t received(Address instance_ip) const {
        auto it = received_.find(instance_ip);
        return it == received_.end() ? 0 : it->second;
    }
    std::size_t queries() const { return queries_; }

private:
    void require_local(Address src) const {
        if (!hosts(src)) throw InvalidArgumentError(src.str() + " is not a local instance of " + endpoint_);
    }

    DeliveryRecord deliver(const Packet& p, const Binding& target, core::Millis now, bool refreshed) {
        DeliveryRecord rec{p.src_instance_ip, p.dst_address, target, false, refreshed, ++seq_};
        if (target.node_endpoint == endpoint_) {
            if (!hosts(target.instance_ip)) throw PeerUnreachableError(target.instance_ip.str() + " is gone");
            rec.loopback = true;
            ++received_[target.instance_ip];
            return rec;
        }
        tunnels_.open_link(target.node_endpoint, now);
        data_plane_->send(endpoint_, target.node_endpoint,
                          encapsulate(TunnelHeader{p.src_instance_ip, target.instance_ip, rec.seq}, p.payload));
        return rec;
    }

    std::string endpoint_;
    ConversionTable table_;
    TunnelSet tunnels_;
    DataPlane* data_plane_;
    Resolver resolver_;
    std::map<Address, std::string> local_;
    std::map<Address, std::size_t> received_;
    std::size_t queries_ = 0;
    std::uint32_t seq_ = 0;
};

/// Data plane that hands datagrams straight to proxies in the same process.
class InMemoryDataPlane final : public DataPlane {
public:
    void attach(Proxy& p) { proxies_[p.endpoint()] = &p; }
    void detach(const std::string& endpoint) { proxies_.erase(endpoint); }
    void set_down(const std::string& endpoint, bool down) {
        if (down) {
            down_.insert(endpoint);
        } else {
            down_.erase(endpoint);
        }
    }

    void send(const std::string&, const std::string& to, std::vector<std::uint8_t> datagram) override {
        auto it = proxies_.find(to);
        if (it == proxies_.end() || down_.count(to)) throw PeerUnreachableError(to);
        ++datagrams_;
        it->second->receive(datagram);
    }

    std::size_t datagrams() const { return datagrams_; }

private:
    std::map<std::string, Proxy*> proxies_;
    std::set<std::string> down_;
    std::size_t datagrams_ = 0;
};

}  // namespace oak::overlay
