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
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oak/core/model.hpp"
#include "oak/errors.hpp"
#include "oak/overlay/address.hpp"

namespace oak::overlay {

enum class LinkState { configured, active };

struct Link {
    LinkState state = LinkState::active;
    core::Millis last_used = 0;
    std::uint64_t use_tick = 0;  // orders uses that share a timestamp
};

/// Tunnel ledger of one worker: every peer it has talked to, at most k of
/// them active. Activating past k demotes the least recently used link.
class TunnelSet {
public:
    TunnelSet(std::string self, std::size_t k, core::Millis idle_gc_ms = 60000)
        : self_(std::move(self)), k_(k), idle_gc_ms_(idle_gc_ms) {
        if (k_ == 0) throw InvalidArgumentError("k must be at least 1");
    }

    /// Activates (or creates) the link to `peer`. Returns the demoted peer, if any.
    std::optional<std::string> open_link(const std::string& peer, core::Millis now) {
        if (peer == self_) throw InvalidArgumentError("no tunnel to self");
        auto [it, inserted] = links_.try_emplace(peer);
        auto& link = it->second;
        if (inserted) link.state = LinkState::configured;
        std::optional<std::string> demoted;
        if (link.state == LinkState::configured) {
            if (active_ == k_) demoted = demote_lru();
            link.state = LinkState::active;
            ++active_;
        }
        link.last_used = now;
        link.use_tick = ++tick_;
        return demoted;
    }

    /// Drops configured links idle for longer than idle_gc_ms.
    std::size_t gc(core::Millis now) {
        std::size_t n = 0;
        for (auto it = links_.begin(); it != links_.end();) {
            if (it->second.state == LinkState::configured && now - it->second.last_used > idle_gc_ms_) {
                it = links_.erase(it);
                ++n;
            } else {
                ++it;
            }
        }
        return n;
    }

    std::set<std::string> active() const { return with_state(LinkState::active); }
    std::set<std::string> configured() const { return with_state(LinkState::configured); }
    std::size_t active_count() const { return active_; }
    std::size_t size() const { return links_.size(); }
    std::size_t k() const { return k_; }
    const std::map<std::string, Link>& links() const { return links_; }

private:
    std::string demote_lru() {
        auto victim = links_.end();
        for (auto it = links_.begin(); it != links_.end(); ++it) {
            if (it->second.state != LinkState::active) continue;
            if (victim == links_.end() || it->second.last_used < victim->second.last_used ||
                (it->second.last_used == victim->second.last_used && it->second.use_tick < victim->second.use_tick)) {
                victim = it;
            }
        }
        victim->second.state = LinkState::configured;
        --active_;
        return victim->first;
    }

    std::set<std::string> with_state(LinkState s) const {
        std::set<std::string> out;
        for (const auto& [p, l] : links_) {
            if (l.state == s) out.insert(p);
        }
        return out;
    }

    std::string self_;
    std::size_t k_;
    core::Millis idle_gc_ms_;
    std::map<std::string, Link> links_;
    std::size_t active_ = 0;
    std::uint64_t tick_ = 0;
};

/// Encapsulation header prepended to every tunnelled datagram:
///   bytes 0-3  source instance ip, big endian
///   bytes 4-7  destination instance ip, big endian
///   bytes 8-11 sequence number, big endian
struct TunnelHeader {
    Address src_instance_ip;
    Address dst_instance_ip;
    std::uint32_t seq = 0;

    static constexpr std::size_t kSize = 12;

    std::array<std::uint8_t, kSize> encode() const {
        std::array<std::uint8_t, kSize> out{};
        put(out.data(), src_instance_ip.value);
        put(out.data() + 4, dst_instance_ip.value);
        put(out.data() + 8, seq);
        return out;
    }

    static TunnelHeader decode(std::span<const std::uint8_t> bytes) {
        if (bytes.size() < kSize) throw MalformedMessageError("datagram shorter than tunnel header");
        return TunnelHeader{Address{get(bytes.data())}, Address{get(bytes.data() + 4)}, get(bytes.data() + 8)};
    }

    friend bool operator==(const TunnelHeader&, const TunnelHeader&) = default;

private:
    static void put(std::uint8_t* p, std::uint32_t v) {
        p[0] = static_cast<std::uint8_t>(v >> 24);
        p[1] = static_cast<std::uint8_t>(v >> 16);
        p[2] = static_cast<std::uint8_t>(v >> 8);
        p[3] = static_cast<std::uint8_t>(v);
    }
    static std::uint32_t get(const std::uint8_t* p) {
        return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
    }
};

/// Payload protection hook; the default leaves bytes untouched.
struct NullCipher {
    std::vector<std::uint8_t> seal(std::vector<std::uint8_t> plain) const { return plain; }
    std::vector<std::uint8_t> open(std::vector<std::uint8_t> sealed) const { return sealed; }
};

inline std::vector<std::uint8_t> encapsulate(const TunnelHeader& h, std::span<const std::uint8_t> payload,
                                             const NullCipher& cipher = {}) {
    const auto head = h.encode();
    std::vector<std::uint8_t> out(head.begin(), head.end());
    auto body = cipher.seal({payload.begin(), payload.end()});
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

inline std::pair<TunnelHeader, std::vector<std::uint8_t>> decapsulate(std::span<const std::uint8_t> datagram,
                                                                      const NullCipher& cipher = {}) {
    const auto h = TunnelHeader::decode(datagram);
    return {h, cipher.open({datagram.begin() + TunnelHeader::kSize, datagram.end()})};
}

}  // namespace oak::overlay
