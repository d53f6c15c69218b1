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


#include <random>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "oak/lifecycle/instance.hpp"
#include "oak/lifecycle/node_engine.hpp"

namespace oak::lifecycle {
namespace {

using S = InstanceState;
using E = LifecycleEvent;

// Legal edges written out from the lifecycle description, independent of next_state().
const std::set<std::tuple<S, E, S>> kLegal = {
    {S::requested, E::placed, S::scheduled}, {S::requested, E::errored, S::failed},
    {S::scheduled, E::started, S::running},  {S::scheduled, E::errored, S::failed},
    {S::running, E::stopped, S::terminated}, {S::running, E::errored, S::failed},
};

core::Placement somewhere() { return core::Placement{"w1", {"c1"}, 0}; }

ServiceInstance in_state(S s) {
    ServiceInstance inst;
    inst.instance_id = "i";
    inst.state = s;
    if (s == S::scheduled || s == S::running || s == S::terminated) inst.placement = somewhere();
    return inst;
}

TEST(Transition, RequestedPlacedIsScheduled) {
    auto inst = in_state(S::requested);
    EXPECT_EQ(transition(inst, E::placed, somewhere()), S::scheduled);
    EXPECT_TRUE(inst.placement.has_value());
}

TEST(Transition, TerminatedIsAbsorbing) {
    auto inst = in_state(S::terminated);
    EXPECT_THROW(transition(inst, E::started), IllegalTransitionError);
    EXPECT_EQ(inst.state, S::terminated);
}

TEST(Transition, ExhaustiveTableMatchesOracle) {
    int legal = 0;
    for (auto s : kAllStates) {
        for (auto e : kAllEvents) {
            auto inst = in_state(s);
            std::optional<S> got;
            try {
                got = transition(inst, e, somewhere());
            } catch (const IllegalTransitionError&) {
            }
            bool expected_legal = false;
            for (const auto& [from, ev, to] : kLegal) {
                if (from == s && ev == e) {
                    expected_legal = true;
                    ASSERT_TRUE(got.has_value()) << state_name(s) << "+" << event_name(e);
                    EXPECT_EQ(*got, to);
                    ++legal;
                }
            }
            if (!expected_legal) {
                EXPECT_FALSE(got.has_value()) << state_name(s) << "+" << event_name(e);
            }
        }
    }
    EXPECT_EQ(legal, 6);
}

TEST(Transition, StartedResetsViolationStreak) {
    auto inst = in_state(S::scheduled);
    inst.violation_streak = 4;
    transition(inst, E::started);
    EXPECT_EQ(inst.violation_streak, 0);
}

TEST(TransitionProperty, FuzzNeverLeavesLegalStates) {
    std::mt19937_64 rng(17);
    InstanceTable table;
    std::vector<InstanceId> ids;
    for (int i = 0; i < 50; ++i) ids.push_back(table.create("s", i, {}).instance_id);
    int illegal_accepted = 0, absorbing_exits = 0;
    for (int step = 0; step < 10000; ++step) {
        const auto& id = ids[rng() % ids.size()];
        const auto e = kAllEvents[rng() % 4];
        const auto before = table.at(id).state;
        try {
            const auto after = table.apply(id, e, somewhere());
            if (!kLegal.count({before, e, after})) ++illegal_accepted;
            if (is_terminal(before)) ++absorbing_exits;
        } catch (const IllegalTransitionError&) {
            EXPECT_EQ(table.at(id).state, before);
        }
        const auto& inst = table.at(id);
        const bool needs_placement = inst.state == S::scheduled || inst.state == S::running || inst.state == S::terminated;
        EXPECT_EQ(inst.placement.has_value(), needs_placement);
    }
    EXPECT_EQ(illegal_accepted, 0);
    EXPECT_EQ(absorbing_exits, 0);
}

DeployCommand cmd(const std::string& id, double cpu, std::int64_t mem) {
    DeployCommand c;
    c.instance_id = id;
    c.service_id = "svc";
    c.capacity = {cpu, mem, 0, 0, 0};
    return c;
}

TEST(NodeEngine, DeployAccountsCapacity) {
    NoopRuntime rt;
    NodeEngine ne("w1", {4, 4096, 0, 0, 0}, overlay::WorkerSubnet{1, 2}, rt);
    const auto ip = ne.deploy(cmd("a", 1, 512));
    EXPECT_TRUE(ne.subnet().contains(ip));
    EXPECT_EQ(ne.used(), (core::CapacityVector{1, 512, 0, 0, 0}));
    EXPECT_TRUE(ne.healthy("a"));
}

TEST(NodeEngine, OversubscriptionRejected) {
    NoopRuntime rt;
    NodeEngine ne("w1", {2, 4096, 0, 0, 0}, overlay::WorkerSubnet{1, 2}, rt);
    ne.deploy(cmd("a", 1.5, 512));
    EXPECT_THROW(ne.deploy(cmd("b", 1.0, 512)), WorkerRejectedError);
    EXPECT_FALSE(ne.hosts("b"));
}

TEST(NodeEngine, StopReleasesEverything) {
    NoopRuntime rt;
    NodeEngine ne("w1", {8, 8192, 0, 0, 0}, overlay::WorkerSubnet{0, 0}, rt);
    std::mt19937_64 rng(3);
    std::map<std::string, core::CapacityVector> live;
    for (int i = 0; i < 500; ++i) {
        if (live.empty() || rng() % 2) {
            const std::string id = "i" + std::to_string(i);
            auto c = cmd(id, 0.25 * static_cast<double>(1 + rng() % 4), 64 * static_cast<std::int64_t>(1 + rng() % 8));
            try {
                ne.deploy(c);
                live[id] = c.capacity;
            } catch (const WorkerRejectedError&) {
            } catch (const SubnetExhaustedError&) {
            }
        } else {
            auto it = std::next(live.begin(), static_cast<long>(rng() % live.size()));
            EXPECT_TRUE(ne.stop(it->first));
            live.erase(it);
        }
        core::CapacityVector sum;
        for (const auto& [_, c] : live) sum += c;
        EXPECT_NEAR(ne.used().cpu_cores, sum.cpu_cores, 1e-9);
        EXPECT_EQ(ne.used().memory_mb, sum.memory_mb);
    }
}

TEST(NodeEngine, SubnetExhausted) {
    NoopRuntime rt;
    NodeEngine ne("w1", {1000, 100000, 0, 0, 0}, overlay::WorkerSubnet{0, 0}, rt);
    for (std::uint32_t i = 0; i < overlay::Address::kMaxSuffix; ++i) ne.deploy(cmd("i" + std::to_string(i), 1, 1));
    EXPECT_THROW(ne.deploy(cmd("x", 1, 1)), SubnetExhaustedError);
}

TEST(ThreadRuntime, StartsAndStops) {
    ThreadRuntime rt;
    core::MockWorkload burn{core::MockWorkload::Kind::cpu_burn, {{"duty", "0.1"}}};
    rt.start("a", burn);
    rt.start("b", core::MockWorkload{});
    EXPECT_TRUE(rt.probe("a"));
    rt.stop("a");
    EXPECT_FALSE(rt.probe("a"));
    EXPECT_TRUE(rt.probe("b"));
}

}  // namespace
}  // namespace oak::lifecycle
