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
#include <vector>

#include "oak/control/message.hpp"
#include "oak/core/model.hpp"

namespace oak::control {

/// Sender half of an at-least-once stream: keeps every message until a
/// cumulative ack covers it and resends what has waited longer than `rto`.
class ReliableSender {
public:
    using Emit = std::function<void(const ControlMessage&)>;

    ReliableSender(Emit emit, core::Millis rto) : emit_(std::move(emit)), rto_(rto) {}

    void send(const ControlMessage& m, core::Millis now) {
        unacked_[m.seq] = {m, now};
        emit_(m);
    }

    /// Cumulative: everything up to and including `seq` arrived.
    void ack(std::uint64_t seq) { unacked_.erase(unacked_.begin(), unacked_.upper_bound(seq)); }

    std::size_t retransmit_due(core::Millis now) {
        std::size_t n = 0;
        for (auto& [_, p] : unacked_) {
            if (now - p.sent_at < rto_) continue;
            p.sent_at = now;
            emit_(p.message);
            ++n;
        }
        retransmissions_ += n;
        return n;
    }

    std::size_t in_flight() const { return unacked_.size(); }
    std::uint64_t retransmissions() const { return retransmissions_; }

private:
    struct Pending {
        ControlMessage message;
        core::Millis sent_at;
    };
    Emit emit_;
    core::Millis rto_;
    std::map<std::uint64_t, Pending> unacked_;
    std::uint64_t retransmissions_ = 0;
};

/// Receiver half: hands messages on in seq order exactly once and reports the
/// cumulative ack. Sequence numbers start at 1 with no gaps.
class ReliableReceiver {
public:
    /// Returns the messages that became deliverable.
    std::vector<ControlMessage> receive(const ControlMessage& m) {
        std::vector<ControlMessage> out;
        if (m.seq <= delivered_ || held_.count(m.seq)) {
            ++duplicates_;
            return out;
        }
        held_.emplace(m.seq, m);
        for (auto it = held_.find(delivered_ + 1); it != held_.end(); it = held_.find(delivered_ + 1)) {
            out.push_back(std::move(it->second));
            held_.erase(it);
            ++delivered_;
        }
        return out;
    }

    std::uint64_t cumulative_ack() const { return delivered_; }
    std::uint64_t duplicates() const { return duplicates_; }

private:
    std::uint64_t delivered_ = 0;
    std::map<std::uint64_t, ControlMessage> held_;
    std::uint64_t duplicates_ = 0;
};

}  // namespace oak::control
