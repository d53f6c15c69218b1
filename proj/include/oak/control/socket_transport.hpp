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

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "oak/control/session.hpp"
#include "oak/control/transport.hpp"

namespace oak::control {

struct Endpoint {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;

    static Endpoint parse(const std::string& s) {
        const auto colon = s.rfind(':');
        if (colon == std::string::npos || colon + 1 == s.size()) throw InvalidArgumentError("expected host:port, got '" + s + "'");
        Endpoint e;
        e.host = colon == 0 ? "127.0.0.1" : s.substr(0, colon);
        try {
            const auto p = std::stoul(s.substr(colon + 1));
            if (p == 0 || p > 65535) throw std::out_of_range("port");
            e.port = static_cast<std::uint16_t>(p);
        } catch (const std::exception&) {
            throw InvalidArgumentError("bad port in '" + s + "'");
        }
        return e;
    }
    std::string str() const { return host + ":" + std::to_string(port); }
};

namespace detail {

inline int connect_to(const Endpoint& e) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(e.host.c_str(), std::to_string(e.port).c_str(), &hints, &res) != 0) return -1;
    int fd = -1;
    for (auto* p = res; p; p = p->ai_next) {
        fd = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd >= 0) {
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    }
    return fd;
}

inline int listen_on(const std::string& host, std::uint16_t port, std::uint16_t& bound) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw NetworkError("socket: " + std::string(std::strerror(errno)));
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addrinfo hints{};
    hints.ai_family = AF_INET;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || !res) {
        ::close(fd);
        throw NetworkError("cannot resolve " + host);
    }
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 64) != 0) {
        const std::string err = std::strerror(errno);
        ::close(fd);
        throw NetworkError("listen on " + host + ":" + std::to_string(port) + ": " + err);
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    bound = ntohs(addr.sin_port);
    return fd;
}

}  // namespace detail

/// TCP transport for live deployments. Frames are the length-prefixed
/// control messages; one poll loop drives sockets, timers and local
/// delivery. Routes are learned from the sender of inbound frames, so a
/// process only needs the address of its parent.
class SocketTransport final : public Transport {
public:
    explicit SocketTransport(std::uint16_t port = 0, const std::string& host = "127.0.0.1")
        : start_(std::chrono::steady_clock::now()) {
        listen_fd_ = detail::listen_on(host, port, port_);
    }
    ~SocketTransport() override {
        for (auto& [fd, _] : conns_) ::close(fd);
        if (listen_fd_ >= 0) ::close(listen_fd_);
    }
    SocketTransport(const SocketTransport&) = delete;
    SocketTransport& operator=(const SocketTransport&) = delete;

    std::uint16_t port() const { return port_; }

    /// Where to dial `actor` when no connection has been learned yet.
    void add_route(const std::string& actor, const Endpoint& e) { directory_[actor] = e; }

    void attach(Actor& actor) override { local_[actor.id()] = &actor; }

    void send(ControlMessage m) override {
        if (tap_ && local_.contains(m.sender)) tap_(m);
        if (local_.contains(m.receiver)) {
            inbox_.push_back(std::move(m));
            return;
        }
        int fd = route(m.receiver);
        if (fd < 0) {
            ++dropped_;
            return;
        }
        conns_.at(fd).out += encode_frame(m);
        flush(fd);
    }

    core::Millis now() const override {
        return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
    }

    std::uint64_t set_timer(const std::string&, core::Millis delay, std::function<void()> fn) override {
        const auto id = ++timer_counter_;
        timers_.emplace(std::pair{now() + std::max<core::Millis>(0, delay), id}, std::move(fn));
        return id;
    }
    void cancel_timer(std::uint64_t id) override {
        std::erase_if(timers_, [id](const auto& t) { return t.first.second == id; });
    }

    /// One round of I/O and due work; waits at most `max_wait` ms.
    void poll_once(core::Millis max_wait) {
        deliver_local();
        core::Millis wait = max_wait;
        if (!timers_.empty()) wait = std::clamp<core::Millis>(timers_.begin()->first.first - now(), 0, max_wait);
        if (!inbox_.empty()) wait = 0;
        std::vector<pollfd> fds;
        fds.push_back({listen_fd_, POLLIN, 0});
        for (const auto& [fd, c] : conns_) fds.push_back({fd, static_cast<short>(POLLIN | (c.out.empty() ? 0 : POLLOUT)), 0});
        ::poll(fds.data(), fds.size(), static_cast<int>(wait));
        if (fds[0].revents & POLLIN) accept_one();
        for (std::size_t i = 1; i < fds.size(); ++i) {
            const int fd = fds[i].fd;
            if (!conns_.contains(fd)) continue;
            if (fds[i].revents & POLLOUT) flush(fd);
            if (fds[i].revents & (POLLIN | POLLHUP | POLLERR)) read_from(fd);
        }
        fire_timers();
        deliver_local();
    }

    /// Runs until `done()` holds or `timeout` ms pass; returns done().
    bool run_until(const std::function<bool()>& done, core::Millis timeout) {
        const auto deadline = now() + timeout;
        while (!done() && now() < deadline) poll_once(std::min<core::Millis>(10, deadline - now()));
        return done();
    }

    void run_for(core::Millis ms) {
        run_until([] { return false; }, ms);
    }

    /// Sees every message a local actor sends.
    void set_tap(std::function<void(const ControlMessage&)> tap) { tap_ = std::move(tap); }

    std::uint64_t dropped() const { return dropped_; }
    std::size_t connections() const { return conns_.size(); }

private:
    struct Conn {
        FrameDecoder decoder;
        std::string out;
        std::set<std::string> peers;
    };

    int route(const std::string& actor) {
        if (auto it = routes_.find(actor); it != routes_.end()) return it->second;
        auto d = directory_.find(actor);
        if (d == directory_.end()) return -1;
        const int fd = detail::connect_to(d->second);
        if (fd < 0) return -1;
        conns_[fd].peers.insert(actor);
        routes_[actor] = fd;
        return fd;
    }

    void accept_one() {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) return;
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        conns_[fd];
    }

    void flush(int fd) {
        auto& c = conns_.at(fd);
        while (!c.out.empty()) {
            const auto n = ::send(fd, c.out.data(), c.out.size(), MSG_DONTWAIT | MSG_NOSIGNAL);
            if (n > 0) {
                c.out.erase(0, static_cast<std::size_t>(n));
            } else if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
                return;
            } else {
                return drop(fd);
            }
        }
    }

    void read_from(int fd) {
        char buf[65536];
        const auto n = ::recv(fd, buf, sizeof buf, MSG_DONTWAIT);
        if (n == 0 || (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK)) return drop(fd);
        if (n < 0) return;
        std::vector<ControlMessage> msgs;
        try {
            msgs = conns_.at(fd).decoder.feed(buf, static_cast<std::size_t>(n));
        } catch (const MalformedMessageError&) {
            return drop(fd);
        }
        for (auto& m : msgs) {
            if (!m.sender.empty() && !local_.contains(m.sender)) {
                routes_[m.sender] = fd;
                conns_.at(fd).peers.insert(m.sender);
            }
            if (local_.contains(m.receiver)) {
                inbox_.push_back(std::move(m));
            } else {
                send(std::move(m));  // relay for actors reachable through us
            }
        }
    }

    void drop(int fd) {
        ::close(fd);
        for (const auto& p : conns_.at(fd).peers) {
            if (auto it = routes_.find(p); it != routes_.end() && it->second == fd) routes_.erase(it);
        }
        conns_.erase(fd);
    }

    void fire_timers() {
        while (!timers_.empty() && timers_.begin()->first.first <= now()) {
            auto fn = std::move(timers_.begin()->second);
            timers_.erase(timers_.begin());
            fn();
        }
    }

    void deliver_local() {
        while (!inbox_.empty()) {
            auto m = std::move(inbox_.front());
            inbox_.pop_front();
            if (auto it = local_.find(m.receiver); it != local_.end()) it->second->on_message(m);
        }
    }

    std::chrono::steady_clock::time_point start_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::map<std::string, Actor*> local_;
    std::map<std::string, Endpoint> directory_;
    std::map<std::string, int> routes_;
    std::map<int, Conn> conns_;
    std::deque<ControlMessage> inbox_;
    std::map<std::pair<core::Millis, std::uint64_t>, std::function<void()>> timers_;
    std::uint64_t timer_counter_ = 0;
    std::uint64_t dropped_ = 0;
    std::function<void(const ControlMessage&)> tap_;
};

/// One request, one reply, for command-line clients. Throws PeerDownError
/// when the peer cannot be reached or stays silent past `timeout`.
inline ControlMessage call(const Endpoint& to, ControlMessage request, core::Millis timeout) {
    const int fd = detail::connect_to(to);
    if (fd < 0) throw PeerDownError("cannot connect to " + to.str());
    const auto frame = encode_frame(request);
    std::size_t off = 0;
    while (off < frame.size()) {
        const auto n = ::send(fd, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
        if (n <= 0) {
            ::close(fd);
            throw PeerDownError("send to " + to.str() + " failed");
        }
        off += static_cast<std::size_t>(n);
    }
    FrameDecoder dec;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout);
    char buf[65536];
    while (true) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()).count();
        if (left <= 0) break;
        pollfd p{fd, POLLIN, 0};
        if (::poll(&p, 1, static_cast<int>(left)) <= 0) continue;
        const auto n = ::recv(fd, buf, sizeof buf, 0);
        if (n <= 0) break;
        for (auto& m : dec.feed(buf, static_cast<std::size_t>(n))) {
            if (m.correlation == request.seq) {
                ::close(fd);
                return m;
            }
        }
    }
    ::close(fd);
    throw PeerDownError("no reply from " + to.str());
}

}  // namespace oak::control
