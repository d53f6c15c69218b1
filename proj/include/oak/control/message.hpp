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

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "oak/errors.hpp"

namespace oak::control {

enum class MessageKind {
    RegisterWorker,
    Telemetry,
    AggregatePush,
    ScheduleRequest,
    ScheduleResponse,
    Deploy,
    InstanceStatus,
    ResolveQuery,
    ResolveReply,
    TableUpdate,
    Alarm,
};

inline constexpr std::array<std::pair<MessageKind, const char*>, 11> kKindNames = {{
    {MessageKind::RegisterWorker, "RegisterWorker"},
    {MessageKind::Telemetry, "Telemetry"},
    {MessageKind::AggregatePush, "AggregatePush"},
    {MessageKind::ScheduleRequest, "ScheduleRequest"},
    {MessageKind::ScheduleResponse, "ScheduleResponse"},
    {MessageKind::Deploy, "Deploy"},
    {MessageKind::InstanceStatus, "InstanceStatus"},
    {MessageKind::ResolveQuery, "ResolveQuery"},
    {MessageKind::ResolveReply, "ResolveReply"},
    {MessageKind::TableUpdate, "TableUpdate"},
    {MessageKind::Alarm, "Alarm"},
}};

inline const char* kind_name(MessageKind k) {
    for (const auto& [kind, name] : kKindNames) {
        if (kind == k) return name;
    }
    return "?";
}

inline MessageKind parse_kind(const std::string& s) {
    for (const auto& [kind, name] : kKindNames) {
        if (s == name) return kind;
    }
    throw MalformedMessageError("unknown message kind '" + s + "'");
}

struct ControlMessage {
    MessageKind kind = MessageKind::Alarm;
    std::string sender;
    std::string receiver;
    std::uint64_t seq = 0;
    std::uint64_t correlation = 0;  // seq of the request this answers, 0 otherwise
    nlohmann::json body = nlohmann::json::object();

    nlohmann::json to_json() const {
        return {{"kind", kind_name(kind)}, {"sender", sender}, {"receiver", receiver},
                {"seq", seq},              {"correlation", correlation}, {"body", body}};
    }

    static ControlMessage from_json(const nlohmann::json& j) {
        if (!j.is_object()) throw MalformedMessageError("message must be an object");
        try {
            ControlMessage m;
            m.kind = parse_kind(j.at("kind").get<std::string>());
            m.sender = j.at("sender").get<std::string>();
            m.receiver = j.value("receiver", std::string());
            m.seq = j.at("seq").get<std::uint64_t>();
            m.correlation = j.value("correlation", std::uint64_t{0});
            m.body = j.value("body", nlohmann::json::object());
            return m;
        } catch (const nlohmann::json::exception& e) {
            throw MalformedMessageError(e.what());
        }
    }
};

/// Wire form: 4-byte big-endian length followed by the JSON text.
inline std::string encode_frame(const ControlMessage& m) {
    const std::string text = m.to_json().dump();
    const auto n = static_cast<std::uint32_t>(text.size());
    std::string out;
    out.reserve(4 + text.size());
    out.push_back(static_cast<char>(n >> 24));
    out.push_back(static_cast<char>(n >> 16));
    out.push_back(static_cast<char>(n >> 8));
    out.push_back(static_cast<char>(n));
    out += text;
    return out;
}

/// Reassembles frames from an arbitrary split of the byte stream.
class FrameDecoder {
public:
    static constexpr std::uint32_t kMaxFrame = 16u << 20;

    std::vector<ControlMessage> feed(const char* data, std::size_t n) {
        buffer_.append(data, n);
        std::vector<ControlMessage> out;
        while (buffer_.size() >= 4) {
            const auto* p = reinterpret_cast<const unsigned char*>(buffer_.data());
            const std::uint32_t len = (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
                                      (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
            if (len > kMaxFrame) throw MalformedMessageError("frame too large");
            if (buffer_.size() < 4 + len) break;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(buffer_.substr(4, len));
            } catch (const nlohmann::json::exception& e) {
                buffer_.erase(0, 4 + len);
                throw MalformedMessageError(e.what());
            }
            buffer_.erase(0, 4 + len);
            out.push_back(ControlMessage::from_json(j));
        }
        return out;
    }

    std::size_t buffered() const { return buffer_.size(); }

private:
    std::string buffer_;
};

/// Hands out strictly increasing sequence numbers per message kind.
class SeqCounter {
public:
    std::uint64_t next(MessageKind k) { return ++next_[k]; }

private:
    std::map<MessageKind, std::uint64_t> next_;
};

/// Receiver side: accepts a message only if its seq exceeds the last one
/// seen on the same (sender, kind) stream.
class SeqTracker {
public:
    bool accept(const ControlMessage& m) {
        auto& last = last_[{m.sender, m.kind}];
        if (m.seq <= last) {
            ++dropped_;
            return false;
        }
        last = m.seq;
        return true;
    }

    void forget(const std::string& sender) {
        for (auto it = last_.begin(); it != last_.end();) {
            it = it->first.first == sender ? last_.erase(it) : std::next(it);
        }
    }

    std::uint64_t dropped() const { return dropped_; }

private:
    std::map<std::pair<std::string, MessageKind>, std::uint64_t> last_;
    std::uint64_t dropped_ = 0;
};

}  // namespace oak::control
