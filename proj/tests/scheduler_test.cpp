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

#include <gtest/gtest.h>

#include "oak/coords/geodesy.hpp"
#include "oak/scheduler/delegate.hpp"
#include "oak/scheduler/ldp.hpp"
#include "oak/scheduler/prioritize.hpp"
#include "oak/scheduler/rom.hpp"
#include "test_oracles.hpp"

namespace oak::scheduler {
namespace {

using core::AggregateStats;
using core::CapacityVector;
using core::Dim;
using core::GeoPoint;

WorkerSnapshot snap(const std::string& id, double cpu_avail, std::int64_t mem_avail,
                    std::set<std::string> virt = {"container"}) {
    WorkerSnapshot w;
    w.worker_id = id;
    w.capacity = {cpu_avail + 1, mem_avail + 100, 0, 0, 0};
    w.used = {1, 100, 0, 0, 0};
    w.geo = GeoPoint(48.0, 11.0);
    w.virtualizations = std::move(virt);
    return w;
}

TaskRequirements task(double cpu, std::int64_t mem, std::string virt = "container") {
    TaskRequirements t;
    t.microservice_id = 1;
    t.capacity = {cpu, mem, 0, 0, 0};
    t.virtualization = std::move(virt);
    return t;
}

AggregateStats stats(double sum, double mean, std::set<std::string> virt = {"container"}) {
    AggregateStats s;
    s.worker_count = 2;
    s[Dim::cpu] = {sum, mean, 0};
    s[Dim::memory] = {sum * 1024, mean * 1024, 0};
    s.supported_virtualizations = std::move(virt);
    return s;
}

// --- root prioritization -------------------------------------------------

TEST(RootPrioritize, HigherMeanSlackFirst) {
    auto order = root_prioritize(task(2, 0), {{"B", stats(10, 3)}, {"A", stats(10, 5)}});
    ASSERT_EQ(order.size(), 2u);
    EXPECT_EQ(order[0].cluster_id, "A");
    EXPECT_EQ(order[1].cluster_id, "B");
}

TEST(RootPrioritize, UnsupportedVirtualization) {
    EXPECT_THROW(root_prioritize(task(1, 0, "unikernel"), {{"A", stats(10, 5)}, {"B", stats(10, 5)}}),
                 NoFeasibleClusterError);
}

TEST(RootPrioritize, HandEvaluatedScores) {
    // cpu 2 / mem 1024: score = (mean_cpu - 2)/2 + (mean_mem - 1024)/1024 + gpu 0 + tpu 0
    auto order = root_prioritize(task(2, 1024), {{"x", stats(10, 5)}, {"y", stats(4, 2)}, {"z", stats(1, 1)}});
    ASSERT_EQ(order.size(), 3u);
    EXPECT_EQ(order[0].cluster_id, "x");
    EXPECT_DOUBLE_EQ(order[0].score, (5.0 - 2) / 2 + (5.0 * 1024 - 1024) / 1024);
    EXPECT_EQ(order[1].cluster_id, "y");
    EXPECT_DOUBLE_EQ(order[1].score, 0.0 + 1.0);
    EXPECT_EQ(order[2].cluster_id, "z");
    EXPECT_FALSE(order[2].feasible);
    EXPECT_TRUE(std::isinf(order[2].score) && order[2].score < 0);
}

TEST(RootPrioritize, TiesByAscendingId) {
    auto order = root_prioritize(task(1, 0), {{"c", stats(10, 5)}, {"a", stats(10, 5)}, {"b", stats(10, 5)}});
    EXPECT_EQ(order[0].cluster_id, "a");
    EXPECT_EQ(order[1].cluster_id, "b");
    EXPECT_EQ(order[2].cluster_id, "c");
}

TEST(RootPrioritize, AreaDisjointFromZoneIsInfeasible) {
    auto t = task(1, 0);
    std::vector<GeoPoint> bavaria = {GeoPoint(47.3, 9.9), GeoPoint(47.3, 13.8), GeoPoint(50.5, 13.8),
                                     GeoPoint(50.5, 9.9)};
    t.area = core::Region{"bavaria", core::GeoZone::from_vertices(bavaria)};
    auto near = stats(10, 5), far = stats(10, 9);
    std::vector<GeoPoint> munich = {GeoPoint(48.1, 11.5), GeoPoint(48.2, 11.6), GeoPoint(48.0, 11.7)};
    std::vector<GeoPoint> lisbon = {GeoPoint(38.7, -9.1), GeoPoint(38.8, -9.2), GeoPoint(38.6, -9.3)};
    near.geo_zone = core::GeoZone::hull_of(munich);
    far.geo_zone = core::GeoZone::hull_of(lisbon);
    auto order = root_prioritize(t, {{"far", far}, {"near", near}});
    EXPECT_EQ(order[0].cluster_id, "near");
    EXPECT_FALSE(order[1].feasible);
}

// --- ROM -----------------------------------------------------------------

TEST(Rom, BestSlackArgmax) {
    std::vector<WorkerSnapshot> ws = {snap("a", 1, 2), snap("b", 3, 4), snap("c", 2, 3)};
    EXPECT_EQ(rom_select(ws, task(0, 0), RomStrategy::best_slack), "b");
}

TEST(Rom, FirstFitInInputOrder) {
    std::vector<WorkerSnapshot> ws = {snap("z", 0.5, 10), snap("y", 2, 10), snap("x", 8, 10)};
    EXPECT_EQ(rom_select(ws, task(1, 10), RomStrategy::first_fit), "y");
}

TEST(Rom, TieGoesToLowestId) {
    std::vector<WorkerSnapshot> ws = {snap("w3", 2, 2), snap("w1", 2, 2), snap("w2", 2, 2)};
    EXPECT_EQ(rom_select(ws, task(1, 1), RomStrategy::best_slack), "w1");
}

TEST(Rom, NoFeasibleWorker) {
    std::vector<WorkerSnapshot> ws = {snap("a", 1, 2, {"unikernel"})};
    EXPECT_THROW(rom_select(ws, task(0, 0), RomStrategy::best_slack), NoFeasibleWorkerError);
    EXPECT_THROW(rom_select(ws, task(0, 0), RomStrategy::first_fit), NoFeasibleWorkerError);
    EXPECT_THROW(rom_select({}, task(0, 0), RomStrategy::first_fit), NoFeasibleWorkerError);
}

TEST(Rom, AcceleratorRequirementHonored) {
    auto a = snap("a", 4, 400), b = snap("b", 2, 200);
    b.capacity.gpu_units = 1;
    std::vector<WorkerSnapshot> ws = {a, b};
    auto t = task(1, 10);
    t.capacity.gpu_units = 1;
    EXPECT_EQ(rom_select(ws, t, RomStrategy::best_slack), "b");
}

std::vector<WorkerSnapshot> random_workers(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> cpu(0.5, 16);
    std::uniform_int_distribution<std::int64_t> mem(128, 16384);
    std::uniform_real_distribution<double> frac(0, 1);
    std::vector<WorkerSnapshot> ws;
    for (int i = 0; i < n; ++i) {
        WorkerSnapshot w;
        w.worker_id = "w" + std::to_string(i);
        w.capacity = {cpu(rng), mem(rng), 0, 0, 0};
        w.used = {w.capacity.cpu_cores * frac(rng), static_cast<std::int64_t>(w.capacity.memory_mb * frac(rng)), 0, 0, 0};
        w.virtualizations = frac(rng) < 0.8 ? std::set<std::string>{"container"} : std::set<std::string>{"unikernel"};
        if (frac(rng) < 0.2) w.virtualizations.insert("unikernel");
        ws.push_back(w);
    }
    std::shuffle(ws.begin(), ws.end(), rng);
    return ws;
}

TEST(RomProperty, MatchesExhaustiveOracle) {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> n(1, 20);
    std::uniform_real_distribution<double> cpu(0, 6);
    std::uniform_int_distribution<std::int64_t> mem(0, 6000);
    for (int i = 0; i < 1000; ++i) {
        const auto ws = random_workers(rng, n(rng));
        const auto t = task(cpu(rng), mem(rng), rng() % 4 == 0 ? "unikernel" : "container");
        for (bool best : {true, false}) {
            const auto expected = testing_oracles::rom_oracle(ws, t, best);
            const auto strategy = best ? RomStrategy::best_slack : RomStrategy::first_fit;
            if (expected) {
                EXPECT_EQ(rom_select(ws, t, strategy), *expected);
            } else {
                EXPECT_THROW(rom_select(ws, t, strategy), NoFeasibleWorkerError);
            }
        }
    }
}

TEST(RomProperty, ScalingInvariance) {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> k(2, 9);
    for (int i = 0; i < 300; ++i) {
        auto ws = random_workers(rng, 12);
        for (auto& w : ws) w.used = {};
        auto t = task(1.0 + static_cast<double>(rng() % 4), 256 * static_cast<std::int64_t>(1 + rng() % 8));
        const int c = k(rng);
        auto scaled = ws;
        for (auto& w : scaled) {
            w.capacity.cpu_cores *= c;
            w.capacity.memory_mb *= c;
        }
        auto st = t;
        st.capacity.cpu_cores *= c;
        st.capacity.memory_mb *= c;
        for (auto strategy : {RomStrategy::best_slack, RomStrategy::first_fit}) {
            try {
                EXPECT_EQ(rom_select(ws, t, strategy), rom_select(scaled, st, strategy));
            } catch (const NoFeasibleWorkerError&) {
                EXPECT_THROW(rom_select(scaled, st, strategy), NoFeasibleWorkerError);
            }
        }
    }
}

// --- LDP -----------------------------------------------------------------

coords::VivaldiCoordinate viv(double x, double y = 0, double z = 0) { return {{x, y, z}, 0.0, 0.2}; }

TEST(Ldp, NoConstraintsEqualsCapacityFilter) {
    std::mt19937_64 rng(1);
    auto ws = random_workers(rng, 15);
    const auto t = task(2, 1000);
    const auto r = ldp_filter(ws, t, {}, nullptr, rng);
    std::vector<std::string> expected;
    for (const auto& w : ws) {
        if (resource_feasible(w, t)) expected.push_back(w.worker_id);
    }
    EXPECT_EQ(r.survivors, expected);
    EXPECT_TRUE(r.estimates.empty());
}

TEST(Ldp, ServiceToServiceThresholds) {
    const GeoPoint target_geo(48.0, 11.0);
    auto x = snap("X", 4, 4000), y = snap("Y", 4, 4000);
    x.geo = coords::destination(target_geo, 90, 50);
    y.geo = coords::destination(target_geo, 90, 200);
    x.vivaldi = viv(10);
    y.vivaldi = viv(10);
    PlacedMap placed;
    placed[7] = PlacedTask{core::Placement{"T", {"c"}, 0}, target_geo, viv(0)};
    auto t = task(1, 100);
    t.s2s_constraints.push_back({7, 120, 20});
    std::mt19937_64 rng(1);
    std::vector<WorkerSnapshot> ws = {x, y};
    EXPECT_EQ(ldp_filter(ws, t, placed, nullptr, rng).survivors, std::vector<std::string>{"X"});
    EXPECT_EQ(ldp_select(ws, t, placed, nullptr, rng), "X");
}

TEST(Ldp, DependencyUnplaced) {
    auto t = task(1, 100);
    t.s2s_constraints.push_back({3, 100, 10});
    std::mt19937_64 rng(1);
    std::vector<WorkerSnapshot> ws = {snap("a", 4, 4000)};
    EXPECT_THROW(ldp_filter(ws, t, {}, nullptr, rng), DependencyUnplacedError);
}

TEST(Ldp, EmptySurvivorsIsNoFeasibleWorker) {
    auto t = task(1, 100);
    t.s2u_constraints.push_back({"u", GeoPoint(0, 0), 10, 5, 3});
    std::mt19937_64 rng(1);
    std::vector<WorkerSnapshot> ws = {snap("a", 4, 4000), snap("b", 4, 4000), snap("c", 4, 4000)};
    auto probe = [](const WorkerSnapshot&, const std::string&) { return 30.0; };
    EXPECT_THROW(ldp_select(ws, t, {}, probe, rng), NoFeasibleWorkerError);
}

struct PlantedCase {
    std::vector<WorkerSnapshot> workers;
    std::vector<double> user;
    GeoPoint user_geo;
};

PlantedCase planted_case(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> pos(0, 80), bearing(0, 360), km(0, 300);
    PlantedCase c;
    c.user_geo = GeoPoint(48.1, 11.6);
    c.user = {pos(rng), pos(rng), pos(rng)};
    for (int i = 0; i < n; ++i) {
        auto w = snap("w" + std::to_string(i), 4, 4000);
        w.geo = coords::destination(c.user_geo, bearing(rng), km(rng));
        w.vivaldi = viv(pos(rng), pos(rng), pos(rng));
        c.workers.push_back(w);
    }
    return c;
}

TEST(LdpProperty, PlantedUserMatchesExhaustiveFilter) {
    std::mt19937_64 rng(44);
    for (int rep = 0; rep < 100; ++rep) {
        auto c = planted_case(rng, 30);
        auto probe = [&](const WorkerSnapshot& w, const std::string&) {
            return testing_oracles::embedded_rtt(w.vivaldi.position, 0, c.user, 0);
        };
        auto t = task(1, 100);
        t.s2u_constraints.push_back({"user", c.user_geo, 120, 20, 5});
        std::mt19937_64 frng(rep);
        const auto r = ldp_filter(c.workers, t, {}, probe, frng);
        const auto expected = testing_oracles::ldp_oracle(c.workers, t, {}, {{48.1, 11.6, 120, 20, c.user, 0}});
        EXPECT_EQ(std::set<std::string>(r.survivors.begin(), r.survivors.end()), expected) << "rep " << rep;
        ASSERT_EQ(r.estimates.size(), 1u);
        EXPECT_EQ(r.estimates[0].anchors.size(), 5u);
    }
}

TEST(LdpProperty, DeterministicForSeed) {
    std::mt19937_64 rng(3);
    auto c = planted_case(rng, 40);
    std::mt19937_64 noise(9);
    std::normal_distribution<double> jitter(0, 0.5);
    std::vector<double> noise_table(1000);
    for (auto& v : noise_table) v = jitter(noise);
    std::size_t k = 0;
    auto probe = [&](const WorkerSnapshot& w, const std::string&) {
        return testing_oracles::embedded_rtt(w.vivaldi.position, 0, c.user, 0) + 5 + noise_table[k++ % 1000];
    };
    auto t = task(1, 100);
    t.s2u_constraints.push_back({"user", c.user_geo, 200, 40, 5});
    std::mt19937_64 r1(77), r2(77);
    k = 0;
    const auto a = ldp_filter(c.workers, t, {}, probe, r1);
    k = 0;
    const auto b = ldp_filter(c.workers, t, {}, probe, r2);
    EXPECT_EQ(a.survivors, b.survivors);
    EXPECT_EQ(a.estimates[0].anchors, b.estimates[0].anchors);
}

TEST(Ldp, AnchorsToppedUpFromCluster) {
    std::vector<WorkerSnapshot> ws = {snap("big", 8, 8000), snap("s1", 0.1, 10), snap("s2", 0.1, 10),
                                      snap("s3", 0.1, 10)};
    for (std::size_t i = 0; i < ws.size(); ++i) ws[i].vivaldi = viv(10.0 * i, 3.0 * i * i, 1.0);
    auto t = task(4, 1000);
    t.s2u_constraints.push_back({"u", GeoPoint(48, 11), 100, 1000, 5});
    auto probe = [](const WorkerSnapshot& w, const std::string&) { return 5.0 + w.vivaldi.position[0]; };
    std::mt19937_64 rng(1);
    const auto r = ldp_filter(ws, t, {}, probe, rng);
    EXPECT_EQ(r.survivors, std::vector<std::string>{"big"});
    EXPECT_EQ(r.estimates[0].anchors.size(), 4u);
    EXPECT_EQ(r.estimates[0].anchors[0], "big");
}

// --- delegation ----------------------------------------------------------

struct TreeFixture {
    core::InfrastructureTree tree;
    SchedulerRegistry registry = SchedulerRegistry::with_builtins();
    ScheduleContext ctx;
    DelegationEnv env;

    TreeFixture() {
        env.tree = &tree;
        env.registry = &registry;
        env.context = &ctx;
    }

    void cluster(const std::string& parent, const std::string& id, std::vector<WorkerSnapshot> ws) {
        core::ClusterNode node;
        node.cluster_id = id;
        for (auto& w : ws) node.workers.emplace(w.worker_id, w);
        tree.add_cluster(parent, node);
    }
};

TEST(Delegate, MinimalTreeTakesTwoDecisions) {
    TreeFixture f;
    f.cluster("root", "c1", {snap("w1", 4, 4000)});
    DelegationTrace trace;
    auto p = delegate(ScheduleRequest::make("s", task(1, 100), 0), f.env, &trace);
    EXPECT_EQ(p.worker_id, "w1");
    EXPECT_EQ(p.cluster_path, std::vector<std::string>{"c1"});
    EXPECT_EQ(trace.decisions, 2);
    EXPECT_EQ(trace.messages.size(), 1u);
    EXPECT_EQ(trace.forwards, 1u);
    EXPECT_EQ(trace.retries, 0u);
}

TEST(Delegate, FallsBackToNextCluster) {
    TreeFixture f;
    // A ranks first on aggregate means but has no single worker big enough.
    f.cluster("root", "A", {snap("a1", 3, 3000), snap("a2", 3, 3000), snap("a3", 3, 3000)});
    f.cluster("root", "B", {snap("b1", 4, 4000), snap("b2", 0.5, 100), snap("b3", 0.5, 100)});
    f.env.scheduler_of = [](const std::string&) { return std::string("rom_first_fit"); };
    DelegationTrace trace;
    auto p = delegate(ScheduleRequest::make("s", task(3.5, 100), 0), f.env, &trace);
    EXPECT_EQ(p.worker_id, "b1");
    ASSERT_EQ(trace.tried.size(), 2u);
    EXPECT_EQ(trace.tried[0], "A");
    EXPECT_EQ(trace.retries, 1u);
}

TEST(Delegate, ExhaustedAndDeadline) {
    TreeFixture f;
    f.cluster("root", "c1", {snap("w1", 1, 100)});
    EXPECT_THROW(delegate(ScheduleRequest::make("s", task(2, 100), 0), f.env), ExhaustedError);
    f.env.now = [] { return core::Millis{6000}; };
    EXPECT_THROW(delegate(ScheduleRequest::make("s", task(0.5, 10), 0), f.env), DeadlineExceededError);
}

TEST(Delegate, DeadlinePassedMidway) {
    TreeFixture f;
    f.cluster("root", "A", {snap("a1", 3, 3000), snap("a2", 3, 3000)});
    f.cluster("root", "B", {snap("b1", 4, 4000)});
    core::Millis clock = 0;
    f.env.now = [&] { return clock += 3000; };
    EXPECT_THROW(delegate(ScheduleRequest::make("s", task(3.5, 100), 0), f.env), DeadlineExceededError);
}

TEST(DelegateProperty, RandomTreesFeasibleAndBounded) {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> fanout(1, 3), wcount(0, 4);
    int placed = 0;
    for (int rep = 0; rep < 300; ++rep) {
        TreeFixture f;
        int next = 0, wnext = 0;
        const int depth = 1 + static_cast<int>(rng() % 3);  // cluster levels below root
        std::vector<std::pair<std::string, int>> frontier{{"root", 0}};
        while (!frontier.empty()) {
            auto [parent, level] = frontier.back();
            frontier.pop_back();
            if (level == depth) continue;
            for (int i = fanout(rng); i > 0; --i) {
                const std::string id = "c" + std::to_string(next++);
                auto ws = random_workers(rng, wcount(rng));
                for (auto& w : ws) w.worker_id = "w" + std::to_string(wnext++);
                f.cluster(parent, id, ws);
                frontier.emplace_back(id, level + 1);
            }
        }
        const auto names = f.registry.names();
        f.env.scheduler_of = [&](const std::string& c) { return names[std::hash<std::string>{}(c) % 2]; };
        auto t = task(2, 2000);
        DelegationTrace trace;
        try {
            auto p = delegate(ScheduleRequest::make("s", t, 0), f.env, &trace);
            ++placed;
            const auto owner = f.tree.owner_of(p.worker_id);
            ASSERT_TRUE(owner.has_value());
            EXPECT_EQ(f.tree.path_to(*owner), p.cluster_path);
            const auto& w = f.tree.cluster(*owner).workers.at(p.worker_id);
            EXPECT_TRUE(testing_oracles::rom_oracle({w}, t, false).has_value());
            const std::size_t t_levels = f.tree.depth();
            EXPECT_LE(trace.forwards, t_levels);
            EXPECT_LE(trace.retries, trace.tried.size() - 1);
            EXPECT_EQ(trace.messages.size(), trace.tried.size());
        } catch (const ExhaustedError&) {
            for (const auto& [id, node] : f.tree.clusters()) {
                for (const auto& [wid, w] : node.workers) EXPECT_FALSE(testing_oracles::rom_oracle({w}, t, false));
            }
        }
    }
    EXPECT_GT(placed, 100);
}

TEST(Reschedule, LocalFirst) {
    TreeFixture f;
    f.cluster("root", "A", {snap("a1", 4, 4000), snap("a2", 4, 4000)});
    f.cluster("root", "B", {snap("b1", 8, 8000)});
    DelegationTrace trace;
    auto p = reschedule(ScheduleRequest::make("s", task(1, 100), 0), "A", "a1", f.env, &trace);
    EXPECT_EQ(p.worker_id, "a2");
    EXPECT_FALSE(trace.escalated);
    EXPECT_EQ(trace.root_messages("root"), 0u);
}

TEST(Reschedule, EscalatesWhenOriginExhausted) {
    TreeFixture f;
    f.cluster("root", "A", {snap("a1", 4, 4000), snap("a2", 0.5, 100)});
    f.cluster("root", "B", {snap("b1", 2, 2000)});
    DelegationTrace trace;
    auto p = reschedule(ScheduleRequest::make("s", task(1, 100), 0), "A", "a1", f.env, &trace);
    EXPECT_EQ(p.worker_id, "b1");
    EXPECT_TRUE(trace.escalated);
    EXPECT_GT(trace.root_messages("root"), 0u);
}

TEST(Reschedule, OnlyFeasibleWorkerFailed) {
    TreeFixture f;
    f.cluster("root", "A", {snap("a1", 4, 4000), snap("a2", 0.5, 100)});
    f.cluster("root", "B", {snap("b1", 0.5, 100)});
    EXPECT_THROW(reschedule(ScheduleRequest::make("s", task(1, 100), 0), "A", "a1", f.env), ExhaustedError);
}

TEST(Registry, UnknownScheduler) {
    auto r = SchedulerRegistry::with_builtins();
    EXPECT_THROW(r.get("magic"), UnknownSchedulerError);
    EXPECT_TRUE(r.contains("ldp"));
}

}  // namespace
}  // namespace oak::scheduler
