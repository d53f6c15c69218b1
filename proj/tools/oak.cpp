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


#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oak/control/socket_transport.hpp"
#include "oak/core/sla.hpp"
#include "oak/live/topology.hpp"
#include "oak/sim/runner.hpp"

namespace {

using namespace oak;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void install_signals() {
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
}

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

std::string root_addr() { return env_or("OAK_ROOT_ADDR", "127.0.0.1:7000"); }
std::string cluster_id() { return env_or("OAK_CLUSTER_ID", ""); }
live::TransportMode transport_mode() { return live::parse_mode(env_or("OAK_TRANSPORT", "socket")); }

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgumentError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgumentError(path + ": " + e.what());
    }
}

std::string join(const nlohmann::json& arr, const char* sep) {
    std::string out;
    for (const auto& x : arr) {
        if (!out.empty()) out += sep;
        out += x.is_string() ? x.get<std::string>() : x.dump();
    }
    return out;
}

// --- sim ---------------------------------------------------------------------

int sim_run(const std::string& file, std::string out) {
    const auto s = sim::load_scenario(file);
    if (out.empty()) out = "out/" + s.name;
    const auto report = sim::run_scenario(s);
    report.write(out);
    std::cout << report.summary() << "csv written to " << out << "\n";
    return 0;
}

int sim_sweep(const std::string& file, const std::string& param, const std::vector<std::string>& values, std::string out) {
    const auto s = sim::load_scenario(file);
    if (out.empty()) out = "out/" + s.name + "-sweep-" + param;
    std::vector<sim::RunReport> reports;
    const auto table = sim::sweep(s, param, values, &reports);
    std::filesystem::create_directories(out);
    std::ofstream(std::filesystem::path(out) / "sweep.csv") << table;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        reports[i].write(std::filesystem::path(out) / (param + "=" + values[i]));
    }
    std::cout << table << "csv written to " << out << "\n";
    return 0;
}

// --- client commands -----------------------------------------------------------

control::ControlMessage request(control::MessageKind kind, nlohmann::json body) {
    control::ControlMessage m;
    m.kind = kind;
    m.sender = "cli-" + std::to_string(::getpid());
    m.receiver = "root";
    m.seq = 1;
    m.body = std::move(body);
    return m;
}

int deploy(const std::string& file, const std::string& regions, const std::string& root, core::Millis timeout) {
    const auto doc = read_json(file);
    core::RegionRegistry reg;
    if (!regions.empty()) reg = core::RegionRegistry::load(regions);
    const auto desc = core::parse_sla(doc, regions.empty() ? nullptr : &reg);
    std::cout << "deploying " << desc.service_id << " (" << desc.tasks.size() << " tasks) to " << root << "\n";
    const auto reply = control::call(control::Endpoint::parse(root), request(control::MessageKind::ScheduleRequest, {{"sla", doc}}), timeout);
    const auto& b = reply.body;
    if (b.contains("reason")) std::cout << "rejected: " << b.at("reason").get<std::string>() << "\n";
    for (const auto& r : b.value("results", nlohmann::json::array())) {
        std::cout << "  microservice " << r.value("microservice_id", std::int64_t{0}) << "  ";
        if (r.value("ok", false)) {
            std::cout << r.value("instance_id", "") << " on " << r.value("worker_id", "") << " via "
                      << join(r.value("cluster_path", nlohmann::json::array()), "/") << "  ip " << r.value("instance_ip", "") << "\n";
        } else {
            std::cout << "failed: " << r.value("reason", "") << "\n";
        }
    }
    const bool ok = b.value("ok", false);
    std::cout << (ok ? "deployed" : "deployment failed") << "\n";
    return ok ? 0 : 1;
}

int status(const std::string& root, bool as_json, core::Millis timeout) {
    const auto reply = control::call(control::Endpoint::parse(root), request(control::MessageKind::InstanceStatus, {{"query", true}}), timeout);
    const auto& b = reply.body;
    if (as_json) {
        std::cout << b.dump(2) << "\n";
        return 0;
    }
    for (const auto& c : b.value("clusters", nlohmann::json::array())) {
        std::cout << "cluster " << c.value("cluster_id", "") << (c.value("down", false) ? "  DOWN" : "  up") << "\n";
    }
    const auto& list = b.value("instances", nlohmann::json::array());
    std::cout << list.size() << " instances\n";
    for (const auto& i : list) {
        std::cout << "  " << i.value("instance_id", "") << "  service " << i.value("service_id", "") << "  "
                  << i.value("state", "");
        if (i.contains("placement")) std::cout << "  on " << i["placement"].value("worker_id", "");
        if (i.contains("instance_ip")) std::cout << "  ip " << i.value("instance_ip", "");
        std::cout << "\n";
    }
    return 0;
}

int topology(const std::string& file) {
    const auto doc = read_json(file);
    if (doc.is_object() && doc.contains("version")) {
        const auto s = sim::parse_scenario(doc);
        sim::Runner r(s);
        std::cout << "scenario " << s.name << "\n";
        std::function<void(const sim::ClusterSpec&, const std::string&)> walk = [&](const sim::ClusterSpec& c, const std::string& pad) {
            std::cout << pad << "cluster " << c.id << "  scheduler " << c.scheduler << "  " << c.workers.size() << " workers\n";
            for (const auto& sub : c.subclusters) walk(sub, pad + "  ");
        };
        for (const auto& c : r.spec().clusters) walk(c, "  ");
        return 0;
    }
    std::cout << live::describe(live::parse_topology(doc));
    return 0;
}

// --- daemons -------------------------------------------------------------------

int up(const std::string& file) {
    const auto mode = transport_mode();
    live::Deployment d(live::load_topology(file), mode);
    d.start();
    install_signals();
    std::cout << "up: " << d.transports() << (mode == live::TransportMode::memory ? " transport (memory)" : " transports (socket)")
              << ", root at " << d.root_endpoint().str() << "\n"
              << std::flush;
    while (!g_stop) d.poll(20);
    return 0;
}

void serve(control::SocketTransport& t) {
    install_signals();
    while (!g_stop) t.poll_once(50);
}

void require_socket(const char* what) {
    if (transport_mode() == live::TransportMode::memory) {
        throw InvalidArgumentError(std::string(what) + " runs in its own process; OAK_TRANSPORT=memory is only for 'oak up'");
    }
}

int root_daemon(std::string listen, const std::string& regions, const std::vector<std::string>& clusters, core::Millis interval) {
    require_socket("root");
    if (listen.empty()) listen = root_addr();
    const auto at = control::Endpoint::parse(listen);
    control::SocketTransport t(at.port, at.host);
    control::RootConfig rc;
    rc.clusters = clusters;
    rc.telemetry.update_interval_ms = interval;
    rc.session.heartbeat_interval_ms = interval;
    if (!regions.empty()) rc.regions = core::RegionRegistry::load(regions);
    control::RootActor root("root", rc, t);
    t.attach(root);
    root.start();
    std::cout << "root listening on " << at.host << ":" << t.port() << "\n" << std::flush;
    serve(t);
    return 0;
}

int cluster_daemon(std::string id, const std::string& listen, std::string parent, const std::string& parent_id,
                   std::uint32_t index, const std::string& scheduler, const std::vector<std::string>& children, core::Millis interval) {
    require_socket("cluster");
    if (id.empty()) id = cluster_id();
    if (id.empty()) throw InvalidArgumentError("cluster id missing: pass --id or set OAK_CLUSTER_ID");
    if (parent.empty()) parent = root_addr();
    const auto at = control::Endpoint::parse(listen);
    control::SocketTransport t(at.port, at.host);
    t.add_route(parent_id, control::Endpoint::parse(parent));
    auto registry = scheduler::SchedulerRegistry::with_builtins();
    control::ClusterConfig cc;
    cc.parent_id = parent_id;
    cc.index = index;
    cc.scheduler = scheduler;
    cc.children = children;
    cc.telemetry.update_interval_ms = interval;
    cc.session.heartbeat_interval_ms = interval;
    control::ClusterActor cluster(id, cc, t, registry);
    t.attach(cluster);
    cluster.start();
    std::cout << "cluster " << id << " listening on " << at.host << ":" << t.port() << ", parent " << parent_id << " at " << parent
              << "\n" << std::flush;
    serve(t);
    return 0;
}

int worker_daemon(const std::string& id, std::string cluster, const std::string& cluster_addr, const std::string& listen,
                  const core::CapacityVector& cap, const std::vector<double>& geo, core::Millis interval) {
    require_socket("worker");
    if (cluster.empty()) cluster = cluster_id();
    if (cluster.empty()) throw InvalidArgumentError("cluster missing: pass --cluster or set OAK_CLUSTER_ID");
    const auto at = listen.empty() ? control::Endpoint{"127.0.0.1", 0} : control::Endpoint::parse(listen);
    control::SocketTransport t(at.port, at.host);
    t.add_route(cluster, control::Endpoint::parse(cluster_addr));
    control::WorkerConfig wc;
    wc.cluster_id = cluster;
    wc.registration.id = id;
    wc.registration.declared_capacity = cap;
    if (geo.size() == 2) wc.registration.geo = core::GeoPoint(geo[0], geo[1]);
    wc.telemetry_interval_ms = interval;
    lifecycle::ThreadRuntime runtime;
    control::WorkerActor worker(wc, t, runtime);
    t.attach(worker);
    worker.start();
    std::cout << "worker " << id << " joined " << cluster << " at " << cluster_addr << "\n" << std::flush;
    serve(t);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oak: hierarchical edge orchestration"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("sim", "run simulated scenarios");
    sim->require_subcommand(1);
    std::string scenario, out, param;
    std::vector<std::string> values;
    auto* run = sim->add_subcommand("run", "run one scenario");
    run->add_option("scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "output directory (default out/<name>)");
    auto* sweep = sim->add_subcommand("sweep", "run a scenario once per parameter value");
    sweep->add_option("scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
    sweep->add_option("--param", param, "parameter to vary")->required();
    sweep->add_option("--values", values, "comma separated values")->required()->delimiter(',');
    sweep->add_option("--out", out, "output directory");

    std::string sla, regions, root = root_addr();
    core::Millis timeout = 30000;
    auto* dep = app.add_subcommand("deploy", "submit a service level agreement to the root");
    dep->add_option("sla", sla, "SLA file")->required()->check(CLI::ExistingFile);
    dep->add_option("--regions", regions, "region registry file")->check(CLI::ExistingFile);
    dep->add_option("--root", root, "root address (default $OAK_ROOT_ADDR)");
    dep->add_option("--timeout", timeout, "milliseconds to wait for the placement");

    bool as_json = false;
    auto* st = app.add_subcommand("status", "list instances known to the root");
    st->add_option("--root", root, "root address (default $OAK_ROOT_ADDR)");
    st->add_flag("--json", as_json, "raw report");
    st->add_option("--timeout", timeout, "milliseconds to wait");

    std::string config;
    auto* topo = app.add_subcommand("topology", "print the tree of a deployment or scenario");
    topo->add_option("config", config, "topology or scenario file")->required()->check(CLI::ExistingFile);

    auto* upc = app.add_subcommand("up", "start every node of a topology in this process");
    upc->add_option("config", config, "topology file")->required()->check(CLI::ExistingFile);

    std::string listen, id, parent, parent_id = "root", sched = "rom_best_slack", cluster, cluster_addr;
    std::vector<std::string> children;
    std::uint32_t index = 0;
    core::Millis interval = 1000;
    auto* rootd = app.add_subcommand("root", "run the root orchestrator");
    rootd->add_option("--listen", listen, "address (default $OAK_ROOT_ADDR)");
    rootd->add_option("--regions", regions, "region registry file")->check(CLI::ExistingFile);
    rootd->add_option("--clusters", children, "clusters expected from the start")->delimiter(',');
    rootd->add_option("--interval", interval, "heartbeat and telemetry interval in ms");

    auto* clusterd = app.add_subcommand("cluster", "run a cluster orchestrator");
    clusterd->add_option("--id", id, "cluster id (default $OAK_CLUSTER_ID)");
    clusterd->add_option("--listen", listen, "address")->required();
    clusterd->add_option("--parent", parent, "parent address (default $OAK_ROOT_ADDR)");
    clusterd->add_option("--parent-id", parent_id, "parent id");
    clusterd->add_option("--index", index, "cluster index, unique in the deployment");
    clusterd->add_option("--scheduler", sched, "placement algorithm");
    clusterd->add_option("--children", children, "sub-cluster ids")->delimiter(',');
    clusterd->add_option("--interval", interval, "heartbeat and telemetry interval in ms");

    core::CapacityVector cap{1.0, 1024, 0, 0, 0};
    std::vector<double> geo;
    std::string wlisten;
    auto* workerd = app.add_subcommand("worker", "run a worker node");
    workerd->add_option("--id", id, "worker id")->required();
    workerd->add_option("--cluster", cluster, "cluster id (default $OAK_CLUSTER_ID)");
    workerd->add_option("--cluster-addr", cluster_addr, "cluster orchestrator address")->required();
    workerd->add_option("--listen", wlisten, "address (default an ephemeral local port)");
    workerd->add_option("--cpu", cap.cpu_cores, "cores");
    workerd->add_option("--memory", cap.memory_mb, "MiB");
    workerd->add_option("--gpu", cap.gpu_units, "gpus");
    workerd->add_option("--geo", geo, "lat,lon")->delimiter(',')->expected(2);
    workerd->add_option("--interval", interval, "telemetry interval in ms");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return sim_run(scenario, out);
        if (sweep->parsed()) return sim_sweep(scenario, param, values, out);
        if (dep->parsed()) return deploy(sla, regions, root, timeout);
        if (st->parsed()) return status(root, as_json, timeout);
        if (topo->parsed()) return topology(config);
        if (upc->parsed()) return up(config);
        if (rootd->parsed()) return root_daemon(listen, regions, children, interval);
        if (clusterd->parsed()) return cluster_daemon(id, listen, parent, parent_id, index, sched, children, interval);
        if (workerd->parsed()) return worker_daemon(id, cluster, cluster_addr, wlisten, cap, geo, interval);
    } catch (const oak::Error& e) {
        std::cerr << "oak: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "oak: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
