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
#include <queue>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "oak/control/transport.hpp"
#include "oak/errors.hpp"

namespace oak::control {

/// Single-threaded virtual-time event loop. Events at equal times run in
/// scheduling order.
class EventLoop {
public:
    core::Millis now() const { return now_; }

    std::uint64_t at(core::Millis when, std::function<void()> fn) {
        const auto id = ++next_id_;
        queue_.push(Event{std::max(when, now_), id, std::move(fn)});
        return id;
    }

    void cancel(std::uint64_t id) { cancelled_.insert(id); }

    /// Runs every event due at or before `until` and leaves the clock there.
    void run_until(core::Millis until) {
        while (!queue_.empty() && queue_.top().when <= until) step();
        now_ = std::max(now_, until);
    }

    /// Runs until nothing is left or `max_events` have run.
    std::size_t run(std::size_t max_events = static_cast<std::size_t>(-1)) {
        std::size_t n = 0;
        while (!queue_.empty() && n < max_events) {
            step();
            ++n;
        }
        return n;
    }

    bool idle() const { return queue_.empty(); }
    std::uint64_t executed() const { return executed_; }

private:
    struct Event {
        core::Millis when;
        std::uint64_t id;
        std::function<void()> fn;
        bool operator>(const Event& o) const { return when != o.when ? when > o.when : id > o.id; }
    };

    void step() {
        Event e = queue_.top();
        queue_.pop();
        now_ = e.when;
        if (cancelled_.erase(e.id)) return;
        ++executed_;
        e.fn();
    }

    core::Millis now_ = 0;
    std::uint64_t next_id_ = 0;
    std::uint64_t executed_ = 0;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::set<std::uint64_t> cancelled_;
};

struct TraceEntry {
    core::Millis sent_at = 0;
    core::Millis delivered_at = 0;
    ControlMessage message;
    bool dropped = false;
};

/// In-memory transport on top of an EventLoop. Delivery delay comes from a
/// latency function; crashes, partitions and random loss drop messages.
class SimNetwork final : public Transport {
public:
    using LatencyFn = std::function<core::Millis(const std::string& from, const std::string& to)>;

    explicit SimNetwork(EventLoop& loop, LatencyFn latency = {}, std::uint64_t seed = 0)
        : loop_(&loop), latency_(std::move(latency)), rng_(seed) {}

    void attach(Actor& actor) override {
        if (!actors_.emplace(actor.id(), &actor).second) throw DuplicateIdError(actor.id());
    }

    void detach(const std::string& id) { actors_.erase(id); }
    bool attached(const std::string& id) const { return actors_.count(id) != 0; }

    void send(ControlMessage m) override {
        const auto now = loop_->now();
        TraceEntry entry{now, now, m, false};
        if (crashed_.count(m.sender) || (loss_ > 0.0 && uniform_(rng_) < loss_)) {
            entry.dropped = true;
            trace_.push_back(std::move(entry));
            return;
        }
        const core::Millis delay = latency_ ? latency_(m.sender, m.receiver) : 0;
        entry.delivered_at = now + delay;
        const std::size_t index = trace_.size();
        trace_.push_back(std::move(entry));
        loop_->at(now + delay, [this, index, m = std::move(m)] {
            if (crashed_.count(m.receiver) || partitioned(m.sender, m.receiver)) {
                trace_[index].dropped = true;
                return;
            }
            auto it = actors_.find(m.receiver);
            if (it == actors_.end()) {
                trace_[index].dropped = true;
                return;
            }
            it->second->on_message(m);
        });
    }

    core::Millis now() const override { return loop_->now(); }

    std::uint64_t set_timer(const std::string& owner, core::Millis delay, std::function<void()> fn) override {
        return loop_->at(loop_->now() + delay, [this, owner, fn = std::move(fn)] {
            if (!crashed_.count(owner)) fn();
        });
    }

    void cancel_timer(std::uint64_t id) override { loop_->cancel(id); }

    void crash(const std::string& id) { crashed_.insert(id); }
    void recover(const std::string& id) { crashed_.erase(id); }
    bool crashed(const std::string& id) const { return crashed_.count(id) != 0; }

    /// Cuts every link between `a` and the members of `group`.
    void partition(const std::string& a, const std::set<std::string>& group) {
        for (const auto& b : group) cut_.insert(ordered(a, b));
    }
    void heal() { cut_.clear(); }

    void set_loss(double p) { loss_ = p; }

    const std::vector<TraceEntry>& trace() const { return trace_; }
    void clear_trace() { trace_.clear(); }
    EventLoop& loop() { return *loop_; }

private:
    static std::pair<std::string, std::string> ordered(const std::string& a, const std::string& b) {
        return a < b ? std::pair{a, b} : std::pair{b, a};
    }
    bool partitioned(const std::string& a, const std::string& b) const { return cut_.count(ordered(a, b)) != 0; }

    EventLoop* loop_;
    LatencyFn latency_;
    std::mt19937_64 rng_;
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
    double loss_ = 0.0;
    std::map<std::string, Actor*> actors_;
    std::set<std::string> crashed_;
    std::set<std::pair<std::string, std::string>> cut_;
    std::vector<TraceEntry> trace_;
};

}  // namespace oak::control
