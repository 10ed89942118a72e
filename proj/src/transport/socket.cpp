// Copyright 2026 The fedtopo Authors
// SPDX-License-Identifier: Apache-2.0

#include "fedtopo/transport/socket.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <iostream>
#include <queue>
#include <thread>
#include <vector>

#include "fedtopo/error.hpp"
#include "fedtopo/transport/codec.hpp"

namespace fedtopo {

namespace {

bool resolve(const Endpoint& ep, sockaddr_in& addr) {
  std::memset(&addr, 0, sizeof addr);
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) == 1) return true;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(ep.host.c_str(), nullptr, &hints, &res) != 0 || !res) return false;
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return true;
}

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL, 0) | O_NONBLOCK); }

int connect_once(const Endpoint& ep) {
  sockaddr_in addr{};
  if (!resolve(ep, addr)) return -1;
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) return -1;
  if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    return -1;
  }
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  set_nonblocking(fd);
  return fd;
}

int connect_with_retry(const Endpoint& ep, const SocketOptions& opt) {
  TimeMs backoff = opt.backoff_ms;
  for (int attempt = 0; attempt < opt.connect_attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff = std::min(backoff * 2, opt.backoff_cap_ms);
    }
    if (const int fd = connect_once(ep); fd >= 0) return fd;
  }
  return -1;
}

int listen_on(const Endpoint& ep) {
  sockaddr_in addr{};
  if (!resolve(ep, addr)) throw Error(Errc::startup_failure, "cannot resolve " + ep.host);
  const int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) throw Error(Errc::startup_failure, "socket() failed");
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 128) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd);
    throw Error(Errc::startup_failure, "cannot listen on " + ep.host + ":" + std::to_string(ep.port) + ": " + why);
  }
  set_nonblocking(fd);
  return fd;
}

struct Conn {
  int fd = -1;
  std::string peer;  // learned from the first frame on inbound connections
  std::vector<std::uint8_t> in;
  std::vector<std::uint8_t> out;
  std::size_t out_off = 0;
};

class Runtime {
 public:
  Runtime(Node& node, const AddressBook& book, std::string parent, const SocketOptions& opt)
      : node_(node), book_(book), parent_(std::move(parent)), opt_(opt),
        start_(std::chrono::steady_clock::now()) {}

  ~Runtime() {
    if (listen_fd_ >= 0) ::close(listen_fd_);
    for (auto& c : inbound_) ::close(c.fd);
    for (auto& [id, c] : outbound_) ::close(c.fd);
  }

  NodeStatus run() {
    auto self = book_.find(node_.id());
    if (self == book_.end()) throw Error(Errc::configuration, "no address for " + node_.id());
    listen_fd_ = listen_on(self->second);

    node_.on_start(now(), box_);
    apply();
    while (node_.status() == NodeStatus::running && !parent_lost_) {
      if (now() > opt_.max_wall_ms) {
        std::cerr << node_.id() << ": wall-clock limit reached\n";
        return NodeStatus::failed;
      }
      step();
    }
    flush();
    if (parent_lost_ && node_.status() == NodeStatus::running) {
      std::cerr << node_.id() << ": lost connection to " << parent_ << "\n";
      return NodeStatus::failed;
    }
    return node_.status();
  }

 private:
  TimeMs now() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
  }

  void apply() {
    for (auto& env : box_.messages()) {
      env.sender = node_.id();
      send(env);
    }
    for (const auto& t : box_.timers()) timers_.push({t.at, t.id});
    box_.clear();
  }

  void send(const Envelope& env) {
    auto it = outbound_.find(env.receiver);
    if (it == outbound_.end()) {
      auto ep = book_.find(env.receiver);
      const int fd = ep == book_.end() ? -1 : connect_with_retry(ep->second, opt_);
      if (fd < 0) {
        if (env.receiver == parent_) parent_lost_ = true;
        return;  // unreachable peers behave like dropped messages
      }
      it = outbound_.emplace(env.receiver, Conn{fd, env.receiver, {}, {}, 0}).first;
    }
    const auto frame = encode_frame(env);
    it->second.out.insert(it->second.out.end(), frame.begin(), frame.end());
  }

  // Parent connection closed: it is alive only if it still accepts connections.
  void check_parent() {
    if (parent_.empty() || node_.status() != NodeStatus::running) return;
    auto ep = book_.find(parent_);
    const int fd = ep == book_.end() ? -1 : connect_with_retry(ep->second, opt_);
    if (fd < 0) {
      parent_lost_ = true;
      return;
    }
    outbound_.erase(parent_);
    outbound_.emplace(parent_, Conn{fd, parent_, {}, {}, 0});
  }

  void step() {
    TimeMs wait = 50;
    if (!timers_.empty()) wait = std::clamp<TimeMs>(timers_.top().first - now(), 0, 50);

    std::vector<pollfd> fds;
    fds.push_back({listen_fd_, POLLIN, 0});
    for (auto& c : inbound_) fds.push_back({c.fd, POLLIN, 0});
    std::vector<std::string> out_ids;
    for (auto& [id, c] : outbound_) {
      fds.push_back({c.fd, static_cast<short>(POLLIN | (c.out.size() > c.out_off ? POLLOUT : 0)), 0});
      out_ids.push_back(id);
    }
    if (::poll(fds.data(), fds.size(), static_cast<int>(wait)) < 0 && errno != EINTR) {
      throw Error(Errc::storage, std::string("poll failed: ") + std::strerror(errno));
    }

    if (fds[0].revents & POLLIN) accept_all();

    std::vector<std::size_t> closed_in;
    for (std::size_t i = 0; i < inbound_.size(); ++i) {
      if (fds[1 + i].revents & (POLLIN | POLLHUP | POLLERR)) {
        if (!read_inbound(inbound_[i])) closed_in.push_back(i);
      }
    }
    bool parent_closed = false;
    for (auto it = closed_in.rbegin(); it != closed_in.rend(); ++it) {
      if (inbound_[*it].peer == parent_) parent_closed = true;
      ::close(inbound_[*it].fd);
      inbound_.erase(inbound_.begin() + static_cast<std::ptrdiff_t>(*it));
    }

    const std::size_t base = 1 + inbound_.size() + closed_in.size();
    for (std::size_t i = 0; i < out_ids.size(); ++i) {
      auto it = outbound_.find(out_ids[i]);
      if (it == outbound_.end()) continue;
      const short re = fds[base + i].revents;
      bool broken = false;
      if (re & (POLLIN | POLLHUP | POLLERR)) {
        char buf[256];
        const ssize_t n = ::recv(it->second.fd, buf, sizeof buf, 0);
        if (n == 0 || (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK)) broken = true;
      }
      if (!broken && (re & POLLOUT)) broken = !write_some(it->second);
      if (broken) {
        if (it->first == parent_) parent_closed = true;
        ::close(it->second.fd);
        outbound_.erase(it);
      }
    }
    if (parent_closed) check_parent();

    while (!timers_.empty() && timers_.top().first <= now() && node_.status() == NodeStatus::running) {
      const auto [at, id] = timers_.top();
      timers_.pop();
      node_.on_timer(id, now(), box_);
      apply();
    }
  }

  void accept_all() {
    for (;;) {
      const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_NONBLOCK | SOCK_CLOEXEC);
      if (fd < 0) return;
      inbound_.push_back(Conn{fd, {}, {}, {}, 0});
    }
  }

  // False once the connection is finished.
  bool read_inbound(Conn& c) {
    std::uint8_t buf[65536];
    bool open = true;
    for (;;) {
      const ssize_t n = ::recv(c.fd, buf, sizeof buf, 0);
      if (n > 0) {
        c.in.insert(c.in.end(), buf, buf + n);
        continue;
      }
      if (n == 0 || (errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR)) open = false;
      break;
    }
    std::size_t off = 0;
    try {
      while (node_.status() == NodeStatus::running) {
        auto frame = try_decode_frame(std::span<const std::uint8_t>(c.in).subspan(off));
        if (!frame) break;
        off += frame->consumed;
        if (c.peer.empty()) c.peer = frame->envelope.sender;
        node_.on_message(frame->envelope, now(), box_);
        apply();
      }
    } catch (const Error& e) {
      std::cerr << node_.id() << ": dropping connection from " << (c.peer.empty() ? "?" : c.peer) << ": "
                << e.what() << "\n";
      return false;
    }
    c.in.erase(c.in.begin(), c.in.begin() + static_cast<std::ptrdiff_t>(off));
    return open;
  }

  bool write_some(Conn& c) {
    while (c.out_off < c.out.size()) {
      const ssize_t n = ::send(c.fd, c.out.data() + c.out_off, c.out.size() - c.out_off, MSG_NOSIGNAL);
      if (n > 0) {
        c.out_off += static_cast<std::size_t>(n);
        continue;
      }
      if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR)) return true;
      return false;
    }
    c.out.clear();
    c.out_off = 0;
    return true;
  }

  void flush() {
    const TimeMs until = now() + opt_.linger_ms;
    for (;;) {
      std::vector<pollfd> fds;
      std::vector<Conn*> conns;
      for (auto& [id, c] : outbound_) {
        if (c.out.size() > c.out_off) {
          fds.push_back({c.fd, POLLOUT, 0});
          conns.push_back(&c);
        }
      }
      if (fds.empty() || now() >= until) return;
      ::poll(fds.data(), fds.size(), 20);
      for (std::size_t i = 0; i < fds.size(); ++i) {
        if (fds[i].revents & (POLLOUT | POLLERR | POLLHUP)) {
          if (!write_some(*conns[i])) conns[i]->out.clear(), conns[i]->out_off = 0;
        }
      }
    }
  }

  Node& node_;
  const AddressBook& book_;
  std::string parent_;
  SocketOptions opt_;
  std::chrono::steady_clock::time_point start_;
  int listen_fd_ = -1;
  Outbox box_;
  std::vector<Conn> inbound_;
  std::map<std::string, Conn> outbound_;
  std::priority_queue<std::pair<TimeMs, std::uint64_t>, std::vector<std::pair<TimeMs, std::uint64_t>>,
                      std::greater<>>
      timers_;
  bool parent_lost_ = false;
};

}  // namespace

NodeStatus run_socket_node(Node& node, const AddressBook& book, const std::string& parent_id,
                           const SocketOptions& options) {
  Runtime rt(node, book, parent_id, options);
  return rt.run();
}

bool probe_endpoint(const Endpoint& endpoint) {
  const int fd = connect_once(endpoint);
  if (fd < 0) return false;
  ::close(fd);
  return true;
}

}  // namespace fedtopo
