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
#include <vector>

#include "oak/control/message.hpp"
#include "oak/errors.hpp"

namespace oak::control {

/// Intra-cluster publish/subscribe. Topics are "<worker_id>/<channel>" and a
/// worker's topics exist only between open_worker and close_worker. Each
/// subscriber drops messages whose seq it has already seen on that stream.
class Broker {
public:
    using Handler = std::function<void(const ControlMessage&)>;

    void open_worker(const std::string& worker_id) { open_.insert(worker_id); }

    void close_worker(const std::string& worker_id) {
        open_.erase(worker_id);
        for (auto it = subs_.begin(); it != subs_.end();) {
            it = owner(it->second.topic) == worker_id ? subs_.erase(it) : std::next(it);
        }
    }

    bool is_open(const std::string& topic) const { return open_.count(owner(topic)) != 0; }

    std::uint64_t subscribe(const std::string& topic, Handler h) {
        check(topic);
        const auto id = ++next_sub_;
        subs_.emplace(id, Subscription{topic, std::move(h), {}});
        return id;
    }

    void unsubscribe(std::uint64_t id) { subs_.erase(id); }

    /// Delivers to every current subscriber of `topic`, in subscription order.
    void publish(const std::string& topic, const ControlMessage& m) {
        check(topic);
        std::vector<std::uint64_t> ids;
        for (const auto& [id, s] : subs_) {
            if (s.topic == topic) ids.push_back(id);
        }
        for (auto id : ids) {
            auto it = subs_.find(id);
            if (it == subs_.end()) continue;
            if (!it->second.seen.accept(m)) continue;
            it->second.handler(m);
        }
    }

    /// Stale or duplicate messages dropped across all subscribers.
    std::uint64_t dropped() const {
        std::uint64_t n = 0;
        for (const auto& [_, s] : subs_) n += s.seen.dropped();
        return n;
    }

    std::size_t subscribers(const std::string& topic) const {
        std::size_t n = 0;
        for (const auto& [_, s] : subs_) n += s.topic == topic;
        return n;
    }

private:
    struct Subscription {
        std::string topic;
        Handler handler;
        SeqTracker seen;
    };

    static std::string owner(const std::string& topic) { return topic.substr(0, topic.find('/')); }

    void check(const std::string& topic) const {
        if (topic.find('/') == std::string::npos) throw TopicClosedError("'" + topic + "' is not <worker>/<channel>");
        if (!is_open(topic)) throw TopicClosedError(topic);
    }

    std::set<std::string> open_;
    std::map<std::uint64_t, Subscription> subs_;
    std::uint64_t next_sub_ = 0;
};

}  // namespace oak::control
