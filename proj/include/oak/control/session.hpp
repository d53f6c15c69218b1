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

#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>

#include "oak/control/transport.hpp"
#include "oak/errors.hpp"

namespace oak::control {

struct SessionConfig {
    core::Millis heartbeat_interval_ms = 1000;
    core::Millis rpc_timeout_ms = 3000;
};

/// Request/response bookkeeping and liveness of inter-cluster peers. Replies
/// are matched on (peer, correlation == request seq). A peer that stays
/// silent for more than three heartbeat intervals, or lets an rpc time out,
/// is marked down once; hearing from it again marks it up.
class SessionTable {
public:
    using OnReply = std::function<void(const ControlMessage&)>;
    using OnError = std::function<void(const PeerDownError&)>;
    using PeerHook = std::function<void(const std::string& peer)>;

    SessionTable(Transport& transport, std::string self, SessionConfig config = {})
        : transport_(&transport), self_(std::move(self)), config_(config) {}

    void on_down(PeerHook h) { down_hook_ = std::move(h); }
    void on_up(PeerHook h) { up_hook_ = std::move(h); }

    void watch(const std::string& peer) { last_heard_.try_emplace(peer, transport_->now()); }
    void unwatch(const std::string& peer) {
        last_heard_.erase(peer);
        down_.erase(peer);
    }

    void rpc(ControlMessage request, OnReply on_reply, OnError on_error, core::Millis timeout = -1) {
        const Key key{request.receiver, request.seq};
        const auto t = transport_->set_timer(self_, timeout < 0 ? config_.rpc_timeout_ms : timeout, [this, key] {
            auto it = pending_.find(key);
            if (it == pending_.end()) return;
            auto err = std::move(it->second.on_error);
            pending_.erase(it);
            mark_down(std::get<0>(key));
            if (err) err(PeerDownError(std::get<0>(key) + " did not answer request " + std::to_string(std::get<1>(key))));
        });
        pending_.emplace(key, Pending{std::move(on_reply), std::move(on_error), t});
        transport_->send(std::move(request));
    }

    /// Feed every inbound message here first. Returns true when it completed
    /// an outstanding rpc.
    bool on_message(const ControlMessage& m) {
        heard(m.sender);
        if (m.correlation == 0) return false;
        auto it = pending_.find(Key{m.sender, m.correlation});
        if (it == pending_.end()) return false;
        auto cb = std::move(it->second.on_reply);
        transport_->cancel_timer(it->second.timer);
        pending_.erase(it);
        if (cb) cb(m);
        return true;
    }

    void heard(const std::string& peer) {
        auto it = last_heard_.find(peer);
        if (it == last_heard_.end()) return;
        it->second = transport_->now();
        if (down_.erase(peer) && up_hook_) up_hook_(peer);
    }

    /// Marks peers silent for more than three intervals as down.
    void check() {
        const auto now = transport_->now();
        std::vector<std::string> silent;
        for (const auto& [peer, t] : last_heard_) {
            if (!down_.count(peer) && now - t > 3 * config_.heartbeat_interval_ms) silent.push_back(peer);
        }
        for (const auto& p : silent) mark_down(p);
    }

    bool is_down(const std::string& peer) const { return down_.count(peer) != 0; }
    std::size_t outstanding() const { return pending_.size(); }
    const SessionConfig& config() const { return config_; }

private:
    using Key = std::tuple<std::string, std::uint64_t>;
    struct Pending {
        OnReply on_reply;
        OnError on_error;
        std::uint64_t timer;
    };

    void mark_down(const std::string& peer) {
        if (!last_heard_.count(peer) || !down_.insert(peer).second) return;
        if (down_hook_) down_hook_(peer);
    }

    Transport* transport_;
    std::string self_;
    SessionConfig config_;
    std::map<Key, Pending> pending_;
    std::map<std::string, core::Millis> last_heard_;
    std::set<std::string> down_;
    PeerHook down_hook_, up_hook_;
};

}  // namespace oak::control
