// Copyright 2026 The Endpointer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "endpointer/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "endpointer/common.hpp"
#include "endpointer/detector.hpp"

namespace ep {
namespace {

void send_all(int fd, const std::vector<std::uint8_t>& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const auto n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error(std::string("send: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

LatencyStats summarize_latency(std::vector<double> us) {
  LatencyStats s;
  s.frames = us.size();
  if (us.empty()) return s;
  std::sort(us.begin(), us.end());
  double sum = 0;
  for (double v : us) sum += v;
  auto rank = [&](double q) {
    auto i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(us.size())));
    return us[std::clamp<std::size_t>(i, 1, us.size()) - 1];
  };
  s.mean_us = sum / static_cast<double>(us.size());
  s.p50_us = rank(0.5);
  s.p99_us = rank(0.99);
  s.max_us = us.back();
  return s;
}

}  // namespace

BindAddress parse_bind(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == s.size()) {
    throw ConfigError("bind address must look like host:port, got '" + s + "'");
  }
  BindAddress b;
  b.host = s.substr(0, colon);
  const std::string port = s.substr(colon + 1);
  char* end = nullptr;
  const long p = std::strtol(port.c_str(), &end, 10);
  if (*end != '\0' || p < 0 || p > 65535) throw ConfigError("bad port '" + port + "'");
  b.port = static_cast<std::uint16_t>(p);
  return b;
}

std::string resolve_bind(const std::string& configured) {
  const char* env = std::getenv(kBindEnvVar);
  return env && *env ? std::string(env) : configured;
}

Server::Server(std::shared_ptr<const ModelCheckpoint> model, ServerConfig cfg, LogSink log)
    : model_(std::move(model)), cfg_(std::move(cfg)), log_(std::move(log)) {
  if (!model_) throw ConfigError("server needs a model");
  if (!(cfg_.threshold > 0 && cfg_.threshold < 1)) throw ConfigError("threshold must lie in (0, 1)");
}

Server::~Server() { stop(); }

void Server::log(const std::string& line) const {
  if (log_) {
    log_(line);
  } else {
    std::fprintf(stderr, "%s\n", line.c_str());
  }
}

void Server::start() {
  const auto addr = parse_bind(cfg_.bind);
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(addr.host.c_str(), nullptr, &hints, &res) != 0 || !res) {
    throw ConfigError("cannot resolve bind host '" + addr.host + "'");
  }
  sockaddr_in sa = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
  ::freeaddrinfo(res);
  sa.sin_port = htons(addr.port);

  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0 ||
      ::listen(listen_fd_, 16) != 0) {
    const std::string err = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw std::runtime_error("cannot listen on " + cfg_.bind + ": " + err);
  }
  socklen_t len = sizeof sa;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&sa), &len);
  port_ = ntohs(sa.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  log("serve: listening on " + addr.host + ":" + std::to_string(port_) + " threshold " +
      std::to_string(cfg_.threshold));
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard<std::mutex> lock(mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

std::vector<LatencyStats> Server::finished() const {
  std::lock_guard<std::mutex> lock(mu_);
  return finished_;
}

void Server::accept_loop() {
  std::size_t next_id = 0;
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard<std::mutex> lock(mu_);
    if (!running_) {
      ::close(fd);
      break;
    }
    open_fds_.push_back(fd);
    const auto id = next_id++;
    workers_.emplace_back([this, fd, id] { handle(fd, id); });
  }
}

void Server::handle(int fd, std::size_t id) {
  const std::string tag = "conn " + std::to_string(id) + ": ";
  const auto& mcfg = model_->config;
  const std::size_t floats = static_cast<std::size_t>(mcfg.n_streams() * mcfg.input_dim);
  wire::Parser parser;
  std::optional<DetectorSession> session;
  std::vector<double> service_us;
  std::uint32_t expected = 0;
  std::vector<std::uint8_t> buf(1 << 16);
  bool done = false;

  auto fail = [&](const std::string& why) {
    log(tag + "error: " + why);
    try {
      send_all(fd, wire::encode(wire::Error{why}));
    } catch (const std::exception&) {
    }
    done = true;
  };

  while (!done) {
    const auto n = ::recv(fd, buf.data(), buf.size(), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    parser.feed(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
    try {
      while (!done) {
        auto msg = parser.next();
        if (!msg) break;
        const auto t0 = std::chrono::steady_clock::now();
        if (auto* h = std::get_if<wire::Hello>(&*msg)) {
          if (session) {
            fail("duplicate HELLO");
          } else if (static_cast<int>(h->n_streams) != mcfg.n_streams()) {
            fail("model expects " + std::to_string(mcfg.n_streams()) + " streams, client sent " +
                 std::to_string(h->n_streams));
          } else if (static_cast<int>(h->dim) != mcfg.input_dim) {
            fail("model expects dim " + std::to_string(mcfg.input_dim) + ", client sent " +
                 std::to_string(h->dim));
          } else if (!(h->frame_rate_hz > 0) ||
                     (model_->meta.frame_rate_hz > 0 &&
                      std::abs(h->frame_rate_hz - model_->meta.frame_rate_hz) > 1e-3)) {
            fail("frame rate " + std::to_string(h->frame_rate_hz) + " does not match the model");
          } else {
            session.emplace(model_, cfg_.threshold, h->frame_rate_hz, cfg_.detect_system_end);
            parser.set_frame_floats(floats);
            send_all(fd, wire::encode(wire::Ready{}));
            log(tag + "ready");
          }
        } else if (auto* f = std::get_if<wire::Frame>(&*msg)) {
          if (!session) {
            fail("FRAME before HELLO");
          } else if (f->frame_index != expected) {
            fail("frame " + std::to_string(f->frame_index) + " out of order, expected " +
                 std::to_string(expected));
          } else {
            ++expected;
            std::vector<std::span<const float>> streams;
            for (int s = 0; s < mcfg.n_streams(); ++s) {
              streams.emplace_back(f->values.data() + static_cast<std::size_t>(s * mcfg.input_dim),
                                   static_cast<std::size_t>(mcfg.input_dim));
            }
            const auto r = session->step(
                streams, f->sys_active ? Activity::SystemActive : Activity::NonSystem);
            wire::Probs p;
            p.frame_index = f->frame_index;
            std::copy(r.probs.begin(), r.probs.end(), p.p);
            auto out = wire::encode(p);
            for (const auto& e : r.events) {
              const auto ev = wire::encode(wire::Endpoint{
                  static_cast<std::uint8_t>(e.kind), static_cast<std::uint32_t>(e.frame_index),
                  static_cast<std::uint32_t>(std::llround(e.time_ms))});
              out.insert(out.end(), ev.begin(), ev.end());
            }
            send_all(fd, out);
            service_us.push_back(
                std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0).count());
          }
        } else if (std::holds_alternative<wire::Bye>(*msg)) {
          send_all(fd, wire::encode(wire::Bye{}));
          done = true;
        } else {
          fail("unexpected message type " + std::to_string(static_cast<int>(wire::type_of(*msg))));
        }
      }
    } catch (const FormatError& e) {
      log(tag + "malformed input, closing: " + e.what());
      done = true;
    } catch (const std::exception& e) {
      fail(e.what());
    }
  }

  const auto stats = summarize_latency(std::move(service_us));
  char line[256];
  std::snprintf(line, sizeof line,
                "closed after %zu frames; service time mean %.1f us, p50 %.1f us, p99 %.1f us, "
                "max %.1f us",
                stats.frames, stats.mean_us, stats.p50_us, stats.p99_us, stats.max_us);
  log(tag + line);
  std::lock_guard<std::mutex> lock(mu_);
  ::close(fd);
  open_fds_.erase(std::remove(open_fds_.begin(), open_fds_.end(), fd), open_fds_.end());
  finished_.push_back(stats);
}

Client::Client(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const auto service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
    throw std::runtime_error("cannot resolve " + host);
  }
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const bool ok = fd_ >= 0 && ::connect(fd_, res->ai_addr, res->ai_addrlen) == 0;
  ::freeaddrinfo(res);
  if (!ok) {
    const std::string err = std::strerror(errno);
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
    throw std::runtime_error("cannot connect to " + host + ":" + service + ": " + err);
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

Client::~Client() { close(); }

void Client::close() {
  if (fd_ >= 0) ::close(fd_);
  fd_ = -1;
}

void Client::send(const wire::Message& m) { send_all(fd_, wire::encode(m)); }

wire::Message Client::receive() {
  std::uint8_t buf[4096];
  for (;;) {
    if (auto m = parser_.next()) return std::move(*m);
    const auto n = ::recv(fd_, buf, sizeof buf, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw std::runtime_error("connection closed by peer");
    parser_.feed(std::span<const std::uint8_t>(buf, static_cast<std::size_t>(n)));
  }
}

}  // namespace ep
