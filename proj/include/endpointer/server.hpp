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

#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "endpointer/checkpoint.hpp"
#include "endpointer/wire.hpp"

namespace ep {

// Environment variable that overrides the configured bind address.
inline constexpr const char* kBindEnvVar = "ENDPOINTER_BIND";

struct BindAddress {
  std::string host = "127.0.0.1";
  std::uint16_t port = 7070;
};

// Parses "host:port" (port 0 asks the OS for a free port).
BindAddress parse_bind(const std::string& s);
// `configured`, unless the environment variable is set.
std::string resolve_bind(const std::string& configured);

struct ServerConfig {
  std::string bind = "127.0.0.1:7070";
  double threshold = 0.9;
  bool detect_system_end = false;
};

// Per-frame service time over one connection, in microseconds.
struct LatencyStats {
  std::size_t frames = 0;
  double mean_us = 0, p50_us = 0, p99_us = 0, max_us = 0;
};

using LogSink = std::function<void(const std::string&)>;

// TCP service: one detector session per connection, one thread per
// connection, frames handled strictly in arrival order.
class Server {
 public:
  Server(std::shared_ptr<const ModelCheckpoint> model, ServerConfig cfg, LogSink log = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts accepting in a background thread.
  void start();
  // Actual port (useful after binding port 0).
  std::uint16_t port() const { return port_; }
  void stop();
  // Stats of every connection closed so far.
  std::vector<LatencyStats> finished() const;

 private:
  void accept_loop();
  void handle(int fd, std::size_t id);
  void log(const std::string& line) const;

  std::shared_ptr<const ModelCheckpoint> model_;
  ServerConfig cfg_;
  LogSink log_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  mutable std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> open_fds_;
  std::vector<LatencyStats> finished_;
};

// Blocking client for the same protocol.
class Client {
 public:
  Client(const std::string& host, std::uint16_t port);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  void send(const wire::Message& m);
  // Blocks until a full message arrives; throws std::runtime_error when the
  // peer closes first.
  wire::Message receive();
  void set_frame_floats(std::size_t n) { parser_.set_frame_floats(n); }
  void close();

 private:
  int fd_ = -1;
  wire::Parser parser_;
};

}  // namespace ep
