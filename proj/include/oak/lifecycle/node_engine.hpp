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

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "oak/core/capacity.hpp"
#include "oak/core/sla.hpp"
#include "oak/errors.hpp"
#include "oak/lifecycle/instance.hpp"
#include "oak/overlay/address.hpp"

namespace oak::lifecycle {

/// Boundary to whatever actually runs an instance.
class RuntimeAdapter {
public:
    virtual ~RuntimeAdapter() = default;
    virtual void start(const InstanceId& id, const core::MockWorkload& workload) = 0;
    virtual void stop(const InstanceId& id) = 0;
    virtual bool probe(const InstanceId& id) const = 0;
};

/// Runtime for simulation: remembers what is running and nothing else.
class NoopRuntime final : public RuntimeAdapter {
public:
    void start(const InstanceId& id, const core::MockWorkload&) override { running_.insert(id); }
    void stop(const InstanceId& id) override { running_.erase(id); }
    bool probe(const InstanceId& id) const override { return running_.count(id) != 0; }

private:
    std::set<InstanceId> running_;
};

/// Runtime for live mode: one thread per instance. `sleep` and `echo` idle
/// until stopped, `cpu_burn` spins for a duty cycle given by the "duty"
/// parameter (0..1, default 0.5) in 10 ms slices.
class ThreadRuntime final : public RuntimeAdapter {
public:
    ~ThreadRuntime() override {
        std::lock_guard lock(mu_);
        threads_.clear();
    }

    void start(const InstanceId& id, const core::MockWorkload& workload) override {
        double duty = 0.0;
        if (workload.kind == core::MockWorkload::Kind::cpu_burn) {
            auto it = workload.parameters.find("duty");
            duty = it == workload.parameters.end() ? 0.5 : std::stod(it->second);
        }
        std::lock_guard lock(mu_);
        threads_[id] = std::make_unique<std::jthread>([duty](std::stop_token st) {
            using clock = std::chrono::steady_clock;
            while (!st.stop_requested()) {
                const auto slice_end = clock::now() + std::chrono::milliseconds(10);
                const auto busy_end = clock::now() + std::chrono::microseconds(static_cast<int>(duty * 10000));
                while (clock::now() < busy_end) {
                }
                std::this_thread::sleep_until(slice_end);
            }
        });
    }

    void stop(const InstanceId& id) override {
        std::unique_ptr<std::jthread> t;
        {
            std::lock_guard lock(mu_);
            auto it = threads_.find(id);
            if (it == threads_.end()) return;
            t = std::move(it->second);
            threads_.erase(it);
        }
    }

    bool probe(const InstanceId& id) const override {
        std::lock_guard lock(mu_);
        return threads_.count(id) != 0;
    }

private:
    mutable std::mutex mu_;
    std::map<InstanceId, std::unique_ptr<std::jthread>> threads_;
};

/// Deployment command as sent to a worker.
struct DeployCommand {
    InstanceId instance_id;
    std::string service_id;
    std::string service_name;
    std::int64_t microservice_id = 0;
    core::MockWorkload workload;
    core::CapacityVector capacity;
    std::optional<overlay::WorkerSubnet> subnet_hint;
};

struct LocalInstance {
    DeployCommand command;
    overlay::Address instance_ip;
    bool sla_violation = false;
};

/// Per-worker deployment agent. Its capacity ledger is authoritative: a
/// deploy that would oversubscribe the worker is rejected.
class NodeEngine {
public:
    NodeEngine(core::WorkerId worker_id, core::CapacityVector capacity, overlay::WorkerSubnet subnet,
               RuntimeAdapter& runtime)
        : worker_id_(std::move(worker_id)), capacity_(capacity), addresses_(subnet), runtime_(&runtime) {}

    const core::WorkerId& worker_id() const { return worker_id_; }
    const core::CapacityVector& capacity() const { return capacity_; }
    const overlay::WorkerSubnet& subnet() const { return addresses_.subnet(); }

    /// Re-homes the engine after a re-registration; only valid when idle.
    void reset_subnet(overlay::WorkerSubnet subnet) {
        if (!instances_.empty()) throw InvalidArgumentError("cannot change subnet with instances running");
        addresses_ = overlay::InstanceAddressPool(subnet);
    }

    overlay::Address deploy(const DeployCommand& cmd) {
        if (instances_.count(cmd.instance_id)) return instances_.at(cmd.instance_id).instance_ip;
        const auto after = used_ + cmd.capacity;
        if (!capacity_.covers(after)) {
            throw WorkerRejectedError(worker_id_ + " cannot fit " + cmd.instance_id);
        }
        const auto ip = addresses_.allocate();
        runtime_->start(cmd.instance_id, cmd.workload);
        used_ = after;
        instances_.emplace(cmd.instance_id, LocalInstance{cmd, ip, false});
        return ip;
    }

    /// Stops an instance and returns its capacity; false if it was not here.
    bool stop(const InstanceId& id) {
        auto it = instances_.find(id);
        if (it == instances_.end()) return false;
        runtime_->stop(id);
        addresses_.release(it->second.instance_ip);
        used_ = core::checked_sub(used_, it->second.command.capacity);
        instances_.erase(it);
        return true;
    }

    void set_violation(const InstanceId& id, bool v) { instances_.at(id).sla_violation = v; }

    const core::CapacityVector& used() const { return used_; }
    const std::map<InstanceId, LocalInstance>& instances() const { return instances_; }
    bool hosts(const InstanceId& id) const { return instances_.count(id) != 0; }
    bool healthy(const InstanceId& id) const { return hosts(id) && runtime_->probe(id); }

private:
    core::WorkerId worker_id_;
    core::CapacityVector capacity_;
    core::CapacityVector used_;
    overlay::InstanceAddressPool addresses_;
    RuntimeAdapter* runtime_;
    std::map<InstanceId, LocalInstance> instances_;
};

}  // namespace oak::lifecycle
