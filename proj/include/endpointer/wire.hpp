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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace ep::wire {

// Frame layout: u32 length (bytes that follow: the type byte plus body),
// u8 type, body. All integers little-endian.
inline constexpr std::uint32_t kMaxMessageBytes = 16u << 20;

enum class Type : std::uint8_t {
  Hello = 1,
  Ready = 2,
  Error = 3,
  Frame = 4,
  Probs = 5,
  Endpoint = 6,
  Bye = 7,
};

struct Hello {
  std::uint8_t n_streams = 1;
  std::uint32_t dim = 0;
  float frame_rate_hz = 0.0f;
};
struct Ready {};
struct Error {
  std::string message;
};
// `values` holds n_streams * dim floats, stream-major.
struct Frame {
  std::uint32_t frame_index = 0;
  std::vector<float> values;
  std::uint8_t sys_active = 0;  // 1 while the system is speaking
};
struct Probs {
  std::uint32_t frame_index = 0;
  float p[4] = {0, 0, 0, 0};
};
struct Endpoint {
  std::uint8_t kind = 1;  // 1 = user end, 3 = system end
  std::uint32_t frame_index = 0;
  std::uint32_t time_ms = 0;
};
struct Bye {};

using Message = std::variant<Hello, Ready, Error, Frame, Probs, Endpoint, Bye>;

Type type_of(const Message& m);

// Full wire bytes including the length prefix.
std::vector<std::uint8_t> encode(const Message& m);

// Decodes a body (type byte onward). Frame bodies are checked against the
// float count the session learns from HELLO; 0 infers it from the length.
// Throws FormatError.
Message decode(std::span<const std::uint8_t> body, std::size_t frame_floats = 0);

// Incremental parser over a byte stream.
class Parser {
 public:
  explicit Parser(std::size_t frame_floats = 0) : frame_floats_(frame_floats) {}
  void set_frame_floats(std::size_t n) { frame_floats_ = n; }
  void feed(std::span<const std::uint8_t> bytes);
  // Next complete message, if any. Throws FormatError on a bad length or body.
  std::optional<Message> next();

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::size_t frame_floats_;
};

}  // namespace ep::wire
