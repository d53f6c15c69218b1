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
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oak/coords/geodesy.hpp"
#include "oak/core/sla.hpp"
#include "oak/sim/planted.hpp"
#include "oak/sim/scenario.hpp"
#include "oak/sim/world.hpp"

namespace oak::sim {

inline double median(std::vector<double> xs) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const auto n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

/// Nearest-rank percentile, p in (0, 100].
inline double percentile(std::vector<double> xs, double p) {
    if (xs.empty()) return 0.0;
    std::sort(xs.begin(), xs.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(xs.size())));
    return xs[std::clamp<std::size_t>(rank, 1, xs.size()) - 1];
}

inline std::string fmt(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

struct RunReport {
    std::string name;
    int tasks = 0;
    int placed = 0;
    int failed = 0;
    int s2u_placed = 0;
    int s2u_satisfied = 0;
    int reschedules = 0;
    int local_reschedules = 0;
    double median_root_us = 0, median_cluster_us = 0, median_total_us = 0, p95_total_us = 0;
    double median_schedule_ms = 0;
    std::uint64_t messages = 0, dropped = 0;
    core::Millis ended_at = 0;
    // File name -> content. timing.csv carries wall-clock measurements; all
    // other files depend on the scenario and seed only.
    std::map<std::string, std::string> csv;

    double satisfied_ratio() const { return s2u_placed ? static_cast<double>(s2u_satisfied) / s2u_placed : 0.0; }

    std::string summary() const {
        std::ostringstream os;
        os << "scenario " << name << " (virtual " << ended_at << " ms)\n"
           << "  tasks " << tasks << ", placed " << placed << ", failed " << failed << "\n"
           << "  calc us (median): root " << fmt(median_root_us, 1) << ", cluster " << fmt(median_cluster_us, 1) << ", total "
           << fmt(median_total_us, 1) << " (p95 " << fmt(p95_total_us, 1) << ")\n"
           << "  schedule ms (median, virtual): " << fmt(median_schedule_ms, 1) << "\n";
        if (s2u_placed) {
            os << "  latency bound met: " << s2u_satisfied << "/" << s2u_placed << " (" << fmt(100.0 * satisfied_ratio(), 1)
               << "%)\n";
        }
        if (reschedules) os << "  reschedules " << reschedules << " (local " << local_reschedules << ")\n";
        os << "  messages " << messages << " (dropped " << dropped << ")\n";
        return os.str();
    }

    void write(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        for (const auto& [file, content] : csv) {
            std::ofstream out(dir / file, std::ios::binary);
            if (!out) throw std::runtime_error("cannot write " + (dir / file).string());
            out << content;
        }
    }
};

/// Builds the world of a scenario, drives it on virtual time and collects
/// metrics.
class Runner {
public:
    explicit Runner(Scenario s)
        : scenario_(std::move(s)),
          planted_(scenario_.area, scenario_.latency.planted, scenario_.seed * 0x9E3779B97F4A7C15ULL + 1),
          rng_(scenario_.seed) {
        scenario_.validate();
        if (scenario_.generator.s2u && scenario_.latency.kind != "planted") {
            throw ScenarioInvalidError("service-to-user workloads need the planted latency model");
        }
        if (!scheduler::SchedulerRegistry::with_builtins().contains(scenario_.topology.scheduler)) {
            throw ScenarioInvalidError("unknown scheduler '" + scenario_.topology.scheduler + "'");
        }
        build_spec();
        plan_workload();
        const bool planted = scenario_.latency.kind == "planted";
        control::SimNetwork::LatencyFn latency = [](const std::string&, const std::string&) { return core::Millis(0); };
        if (planted) {
            latency = [this](const std::string& a, const std::string& b) {
                if (!planted_.contains(a) || !planted_.contains(b)) return core::Millis(0);
                return static_cast<core::Millis>(std::llround(planted_.rtt(a, b) / 2));
            };
        }
        scheduler::RttProbe probe = [this](const core::WorkerSnapshot& w, const std::string& user) {
            return planted_.ping(w.worker_id, user);
        };
        world_ = std::make_unique<World>(spec_, latency, probe, &collector_);
    }

    RunReport run() {
        auto& loop = world_->loop();
        core::Millis last = 0;
        for (const auto& f : scenario_.faults) {
            loop.at(f.at_ms, [this, f] { inject(f); });
            last = std::max(last, f.at_ms + f.duration_ms);
        }
        for (auto& p : plan_) {
            loop.at(p.at, [this, &p] {
                submitted_[p.service.service_id] = world_->now();
                world_->root().submit(p.service);
            });
            last = std::max(last, p.at);
        }
        const core::Millis end = scenario_.duration_ms > 0 ? scenario_.duration_ms : last + scenario_.settle_ms;
        for (core::Millis t = scenario_.sample_ms; t <= end; t += scenario_.sample_ms) loop.at(t, [this] { sample(); });
        world_->start();
        world_->run_until(end);
        return report();
    }

    World& world() { return *world_; }
    const PlantedNetwork& planted() const { return planted_; }
    const WorldSpec& spec() const { return spec_; }

private:
    struct Planned {
        core::Millis at = 0;
        core::ServiceDescriptor service;
    };

    struct Collector final : control::Observer {
        std::map<std::string, double> root_us, cluster_us;
        std::vector<control::ScheduleRecord> records;
        std::ostringstream events;
        int reschedules = 0, local = 0;

        void root_calc(const std::string& id, double us) override { root_us[id] += us; }
        void cluster_calc(const std::string&, const std::string& id, double us) override { cluster_us[id] += us; }
        void scheduled(const control::ScheduleRecord& r) override { records.push_back(r); }
        void instance_state(core::Millis t, const std::string& where, const std::string& id,
                            lifecycle::InstanceState s) override {
            events << t << ',' << where << ',' << id << ',' << lifecycle::state_name(s) << ",\n";
        }
        void rescheduled(core::Millis t, const std::string& where, const std::string& failed, const std::string& repl,
                         bool is_local, bool ok) override {
            ++reschedules;
            local += is_local && ok;
            events << t << ',' << where << ',' << failed << ','
                   << (ok ? (is_local ? "rescheduled_local" : "rescheduled") : (is_local ? "escalated" : "reschedule_failed"))
                   << ',' << repl << '\n';
        }
    };

    std::string worker_name(const std::string& cluster, int k) const { return cluster + "-w" + std::to_string(k); }

    double draw(const Range& r) {
        if (r.hi <= r.lo) return r.lo;
        std::uniform_int_distribution<long long> d(static_cast<long long>(std::ceil(r.lo)), static_cast<long long>(std::floor(r.hi)));
        return static_cast<double>(d(rng_));
    }

    ClusterSpec make_cluster(const std::string& id, std::size_t top, int tier) {
        ClusterSpec c;
        c.id = id;
        c.scheduler = scenario_.topology.scheduler;
        const auto& t = scenario_.worker_template;
        for (int k = 1; k <= scenario_.topology.workers_of(top); ++k) {
            WorkerSpec w;
            w.id = worker_name(id, k);
            w.capacity.cpu_cores = draw(t.cpu);
            w.capacity.memory_mb = static_cast<std::int64_t>(draw(t.memory));
            w.capacity.gpu_units = static_cast<std::int64_t>(draw(t.gpu));
            w.capacity.tpu_units = static_cast<std::int64_t>(draw(t.tpu));
            w.virtualizations = t.virtualizations;
            w.geo = planted_.add_server(w.id).geo;
            c.workers.push_back(std::move(w));
        }
        if (tier < scenario_.topology.tiers) {
            for (int b = 1; b <= scenario_.topology.branching; ++b) {
                c.subclusters.push_back(make_cluster(id + "-" + std::to_string(b), top, tier + 1));
            }
        }
        return c;
    }

    void place_orchestrator(const ClusterSpec& c) {
        std::vector<core::GeoPoint> pts;
        collect_geo(c, pts);
        double lat = scenario_.area.center.latitude(), lon = scenario_.area.center.longitude();
        if (!pts.empty()) {
            lat = lon = 0;
            for (const auto& p : pts) {
                lat += p.latitude();
                lon += p.longitude();
            }
            lat /= static_cast<double>(pts.size());
            lon /= static_cast<double>(pts.size());
        }
        planted_.add(c.id, core::GeoPoint(lat, lon), scenario_.latency.planted.height_min_ms);
        for (const auto& s : c.subclusters) place_orchestrator(s);
    }
    static void collect_geo(const ClusterSpec& c, std::vector<core::GeoPoint>& out) {
        for (const auto& w : c.workers) out.push_back(w.geo);
        for (const auto& s : c.subclusters) collect_geo(s, out);
    }
    static void collect_workers(ClusterSpec& c, std::vector<WorkerSpec*>& out) {
        for (auto& w : c.workers) out.push_back(&w);
        for (auto& s : c.subclusters) collect_workers(s, out);
    }

    void build_spec() {
        spec_.seed = scenario_.seed;
        spec_.telemetry = scenario_.telemetry;
        spec_.session.heartbeat_interval_ms = scenario_.telemetry.update_interval_ms;
        for (int i = 1; i <= scenario_.topology.clusters; ++i) {
            spec_.clusters.push_back(make_cluster("c" + std::to_string(i), static_cast<std::size_t>(i - 1), 1));
        }
        planted_.add("root", scenario_.area.center, scenario_.latency.planted.height_min_ms);
        for (const auto& c : spec_.clusters) place_orchestrator(c);
        for (auto& c : spec_.clusters) collect_workers(c, workers_);
        if (scenario_.latency.kind == "planted") {
            std::vector<std::string> ids;
            for (const auto* w : workers_) ids.push_back(w->id);
            const auto learned = warm_up_vivaldi(planted_, ids, scenario_.latency.warmup, scenario_.seed + 17);
            for (auto* w : workers_) w->vivaldi = learned.at(w->id);
        }
    }

    void plan_workload() {
        const auto& g = scenario_.generator;
        for (int i = 0; i < g.count; ++i) {
            core::TaskRequirements t;
            t.microservice_id = 1;
            t.name = "g" + std::to_string(i);
            t.capacity = g.capacity;
            if (g.s2u) {
                if (workers_.empty()) throw ScenarioInvalidError("service-to-user workload without workers");
                const auto user = "u" + std::to_string(i);
                std::uniform_int_distribution<std::size_t> pick(0, workers_.size() - 1);
                bool ok = false;
                // A worker close enough in latency must exist for every user.
                for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
                    const auto* w = workers_[pick(rng_)];
                    planted_.add_user_near(user, w->geo, g.s2u->user_offset_km);
                    ok = planted_.rtt(w->id, user) <= 0.8 * g.s2u->latency_ms &&
                         coords::dist_gc(w->geo, planted_.node(user).geo) <= g.s2u->distance_km;
                }
                if (!ok) throw ScenarioInvalidError("cannot place a user with a feasible worker; loosen the s2u bounds");
                core::S2UConstraint c;
                c.user_endpoint = user;
                c.geo_target = planted_.node(user).geo;
                c.geo_threshold_km = g.s2u->distance_km;
                c.latency_threshold_ms = g.s2u->latency_ms;
                c.probe_count = g.s2u->probes;
                t.s2u_constraints.push_back(c);
                users_[t.name] = c;
            }
            plan_.push_back({g.start_ms + i * g.spacing_ms, core::ServiceDescriptor{t.name, {t}}});
        }
        for (const auto& s : scenario_.services) {
            try {
                plan_.push_back({s.at_ms, core::parse_sla(s.sla)});
            } catch (const Error& e) {
                throw ScenarioInvalidError(std::string("workload service: ") + e.what());
            }
        }
    }

    void inject(const Fault& f) {
        if (f.kind == "worker_crash") {
            if (!world_->workers().contains(f.target)) throw ScenarioInvalidError("fault on unknown worker " + f.target);
            world_->crash_worker(f.target);
        } else if (f.kind == "worker_restart") {
            if (!world_->workers().contains(f.target)) throw ScenarioInvalidError("fault on unknown worker " + f.target);
            world_->restart_worker(f.target);
        } else {
            if (!world_->clusters().contains(f.target)) throw ScenarioInvalidError("fault on unknown cluster " + f.target);
            std::set<std::string> rest = {"root"};
            for (const auto& [id, _] : world_->clusters()) {
                if (id != f.target) rest.insert(id);
            }
            for (const auto& [id, _] : world_->workers()) {
                if (world_->cluster_of(id) != f.target) rest.insert(id);
            }
            world_->network().partition(f.target, rest);
            if (f.duration_ms > 0) world_->loop().at(world_->now() + f.duration_ms, [this] { world_->network().heal(); });
        }
    }

    /// Cluster view against the ground truth of the workers underneath.
    void sample() {
        const auto now = world_->now();
        for (const auto& [cid, c] : world_->clusters()) {
            std::vector<core::AggregateStats> kids;
            for (auto& [_, s] : c->resources().live_child_aggregates(now)) kids.push_back(s);
            const auto live = c->resources().live_snapshots(now);
            std::int64_t n = 0;
            double cpu = 0, mem = 0;
            try {
                const auto agg = core::aggregate(std::span<const core::WorkerSnapshot>(live), std::span<const core::AggregateStats>(kids));
                n = agg.worker_count;
                cpu = agg[core::Dim::cpu].sum;
                mem = agg[core::Dim::memory].sum;
            } catch (const EmptyAggregateError&) {
            }
            std::int64_t leaf_n = 0;
            double leaf_cpu = 0, leaf_mem = 0;
            for (const auto& [wid, w] : world_->workers()) {
                if (world_->network().crashed(wid) || !under(wid, cid)) continue;
                const auto& decl = world_->worker(wid).engine().capacity();
                const auto& used = world_->worker(wid).engine().used();
                ++leaf_n;
                leaf_cpu += decl.cpu_cores - used.cpu_cores;
                leaf_mem += static_cast<double>(decl.memory_mb - used.memory_mb);
            }
            resources_ << now << ',' << cid << ',' << n << ',' << fmt(cpu) << ',' << fmt(mem) << ',' << leaf_n << ','
                       << fmt(leaf_cpu) << ',' << fmt(leaf_mem) << '\n';
        }
    }

    bool under(const std::string& worker, const std::string& cluster) const {
        const auto& owner = world_->cluster_of(worker);
        return owner == cluster || owner.rfind(cluster + "-", 0) == 0;
    }

    RunReport report() {
        RunReport r;
        r.name = scenario_.name;
        r.ended_at = world_->now();
        std::ostringstream placements, timing, messages;
        placements << "decided_ms,kind,service,instance_id,ok,worker,cluster_path,clusters_tried,schedule_ms,rtt_ms,distance_km,"
                      "satisfied,reason\n";
        timing << "instance_id,kind,root_calc_us,cluster_calc_us,total_us\n";
        std::vector<double> root, cluster, total, sched;
        for (const auto& rec : collector_.records) {
            const double ru = collector_.root_us.count(rec.instance_id) ? collector_.root_us.at(rec.instance_id) : 0.0;
            const double cu = collector_.cluster_us.count(rec.instance_id) ? collector_.cluster_us.at(rec.instance_id) : 0.0;
            std::string path, worker, rtt, dist, satisfied;
            if (rec.placement) {
                worker = rec.placement->worker_id;
                for (std::size_t i = 0; i < rec.placement->cluster_path.size(); ++i) path += (i ? "/" : "") + rec.placement->cluster_path[i];
            }
            const auto task_name = rec.service_id;
            if (auto u = users_.find(task_name); u != users_.end() && rec.ok) {
                const double a = planted_.rtt(worker, u->second.user_endpoint);
                const double d = coords::dist_gc(planted_.node(worker).geo, u->second.geo_target);
                const bool ok = a <= u->second.latency_threshold_ms;
                rtt = fmt(a);
                dist = fmt(d);
                satisfied = ok ? "1" : "0";
                if (rec.kind == "initial") {
                    ++r.s2u_placed;
                    r.s2u_satisfied += ok;
                }
            }
            placements << rec.decided_at << ',' << rec.kind << ',' << rec.service_id << ',' << rec.instance_id << ','
                       << (rec.ok ? 1 : 0) << ',' << worker << ',' << path << ',' << rec.clusters_tried << ','
                       << (rec.decided_at - rec.requested_at) << ',' << rtt << ',' << dist << ',' << satisfied << ','
                       << csv_field(rec.reason) << '\n';
            timing << rec.instance_id << ',' << rec.kind << ',' << fmt(ru) << ',' << fmt(cu) << ',' << fmt(ru + cu) << '\n';
            if (rec.kind != "initial") continue;
            ++r.tasks;
            (rec.ok ? r.placed : r.failed)++;
            root.push_back(ru);
            cluster.push_back(cu);
            total.push_back(ru + cu);
            sched.push_back(static_cast<double>(rec.decided_at - rec.requested_at));
        }
        r.median_root_us = median(root);
        r.median_cluster_us = median(cluster);
        r.median_total_us = median(total);
        r.p95_total_us = percentile(total, 95);
        r.median_schedule_ms = median(sched);
        r.reschedules = collector_.reschedules;
        r.local_reschedules = collector_.local;

        std::map<std::tuple<std::string, std::string, std::string>, std::pair<std::uint64_t, std::uint64_t>> counts;
        for (const auto& e : world_->network().trace()) {
            auto& c = counts[{std::string(control::kind_name(e.message.kind)), e.message.sender, e.message.receiver}];
            ++c.first;
            c.second += e.dropped;
            ++r.messages;
            r.dropped += e.dropped;
        }
        messages << "kind,sender,receiver,sent,dropped\n";
        for (const auto& [k, c] : counts) {
            messages << std::get<0>(k) << ',' << std::get<1>(k) << ',' << std::get<2>(k) << ',' << c.first << ',' << c.second << '\n';
        }
        r.csv["placements.csv"] = placements.str();
        r.csv["timing.csv"] = timing.str();
        r.csv["messages.csv"] = messages.str();
        r.csv["resources.csv"] = "t_ms,cluster,workers,cpu_available,memory_available,leaf_workers,leaf_cpu_available,"
                                 "leaf_memory_available\n" +
                                 resources_.str();
        r.csv["events.csv"] = "t_ms,where,instance_id,event,replacement\n" + collector_.events.str();
        return r;
    }

    static std::string csv_field(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + "\"";
    }

    Scenario scenario_;
    PlantedNetwork planted_;
    std::mt19937_64 rng_;
    WorldSpec spec_;
    std::vector<WorkerSpec*> workers_;
    std::vector<Planned> plan_;
    std::map<std::string, core::S2UConstraint> users_;
    std::map<std::string, core::Millis> submitted_;
    Collector collector_;
    std::ostringstream resources_;
    std::unique_ptr<World> world_;
};

inline RunReport run_scenario(const Scenario& s) { return Runner(s).run(); }

/// Knobs a sweep may vary.
inline const std::vector<std::string>& sweep_parameters() {
    static const std::vector<std::string> names = {"workers", "clusters", "workers_per_cluster", "tiers", "scheduler", "seed", "tasks"};
    return names;
}

/// A copy of `base` with one knob changed. "workers" and "clusters" keep the
/// other one fixed and spread workers as evenly as possible.
inline Scenario with_parameter(Scenario s, const std::string& param, const std::string& value) {
    const auto& known = sweep_parameters();
    if (std::find(known.begin(), known.end(), param) == known.end()) {
        std::string list;
        for (const auto& k : known) list += (list.empty() ? "" : ", ") + k;
        throw UnknownParameterError("'" + param + "', expected one of: " + list);
    }
    auto integer = [&] {
        try {
            std::size_t end = 0;
            const long long v = std::stoll(value, &end);
            if (end != value.size()) throw std::invalid_argument(value);
            return v;
        } catch (const std::exception&) {
            throw ScenarioInvalidError("parameter " + param + " needs an integer, got '" + value + "'");
        }
    };
    auto spread = [&](int total, int clusters) {
        if (clusters < 1) throw ScenarioInvalidError("clusters must be at least 1");
        s.topology.clusters = clusters;
        s.topology.workers_per_cluster.assign(static_cast<std::size_t>(clusters), total / clusters);
        for (int i = 0; i < total % clusters; ++i) ++s.topology.workers_per_cluster[static_cast<std::size_t>(i)];
    };
    auto total_workers = [&] {
        int n = 0;
        for (int i = 0; i < s.topology.clusters; ++i) n += s.topology.workers_of(static_cast<std::size_t>(i));
        return n;
    };
    if (param == "workers") {
        spread(static_cast<int>(integer()), s.topology.clusters);
    } else if (param == "clusters") {
        spread(total_workers(), static_cast<int>(integer()));
    } else if (param == "workers_per_cluster") {
        s.topology.workers_per_cluster = {static_cast<int>(integer())};
    } else if (param == "tiers") {
        s.topology.tiers = static_cast<int>(integer());
    } else if (param == "scheduler") {
        s.topology.scheduler = value == "rom" ? "rom_best_slack" : value;
    } else if (param == "seed") {
        s.seed = static_cast<std::uint64_t>(integer());
    } else if (param == "tasks") {
        s.generator.count = static_cast<int>(integer());
    }
    s.name += "[" + param + "=" + value + "]";
    s.validate();
    return s;
}

inline constexpr const char* kSweepHeader =
    "param,value,tasks,placed,failed,median_root_us,median_cluster_us,median_total_us,p95_total_us,median_schedule_ms,"
    "s2u_satisfied_ratio,messages\n";

inline std::string sweep_row(const std::string& param, const std::string& value, const RunReport& r) {
    std::ostringstream os;
    os << param << ',' << value << ',' << r.tasks << ',' << r.placed << ',' << r.failed << ',' << fmt(r.median_root_us) << ','
       << fmt(r.median_cluster_us) << ',' << fmt(r.median_total_us) << ',' << fmt(r.p95_total_us) << ','
       << fmt(r.median_schedule_ms) << ',' << fmt(r.satisfied_ratio(), 4) << ',' << r.messages << '\n';
    return os.str();
}

/// One run per value with the base seed; returns the comparison table.
inline std::string sweep(const Scenario& base, const std::string& param, const std::vector<std::string>& values,
                         std::vector<RunReport>* reports = nullptr) {
    const auto& known = sweep_parameters();
    if (std::find(known.begin(), known.end(), param) == known.end()) {
        std::string list;
        for (const auto& k : known) list += (list.empty() ? "" : ", ") + k;
        throw UnknownParameterError("'" + param + "', expected one of: " + list);
    }
    std::string table = kSweepHeader;
    for (const auto& v : values) {
        auto r = run_scenario(with_parameter(base, param, v));
        table += sweep_row(param, v, r);
        if (reports) reports->push_back(std::move(r));
    }
    return table;
}

}  // namespace oak::sim
