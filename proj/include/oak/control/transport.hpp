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
#include <string>

#include "oak/control/message.hpp"
#include "oak/core/model.hpp"

namespace oak::control {

/// Something that owns an id and reacts to control messages.
class Actor {
public:
    virtual ~Actor() = default;
    virtual const std::string& id() const = 0;
    virtual void start() {}
    virtual void on_message(const ControlMessage& m) = 0;
};

/// Delivery and clock for a set of actors. Handlers never block: replies
/// arrive later as ordinary messages.
class Transport {
public:
    virtual ~Transport() = default;
    virtual void attach(Actor& actor) = 0;
    virtual void send(ControlMessage m) = 0;
    virtual core::Millis now() const = 0;
    /// Runs `fn` after `delay` ms on behalf of `owner`. Timers of a crashed
    /// owner never fire.
    virtual std::uint64_t set_timer(const std::string& owner, core::Millis delay, std::function<void()> fn) = 0;
    virtual void cancel_timer(std::uint64_t id) = 0;
};

}  // namespace oak::control
