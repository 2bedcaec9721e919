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

#include "endpointer/wire.hpp"

#include <cstring>

#include "endpointer/bytes.hpp"
#include "endpointer/common.hpp"

namespace ep::wire {

Type type_of(const Message& m) {
  return std::visit(
      [](const auto& v) -> Type {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, Hello>) return Type::Hello;
        if constexpr (std::is_same_v<V, Ready>) return Type::Ready;
        if constexpr (std::is_same_v<V, Error>) return Type::Error;
        if constexpr (std::is_same_v<V, Frame>) return Type::Frame;
        if constexpr (std::is_same_v<V, Probs>) return Type::Probs;
        if constexpr (std::is_same_v<V, Endpoint>) return Type::Endpoint;
        return Type::Bye;
      },
      m);
}

std::vector<std::uint8_t> encode(const Message& m) {
  bytes::Writer w;
  w.u32(0);
  w.u8(static_cast<std::uint8_t>(type_of(m)));
  std::visit(
      [&](const auto& v) {
        using V = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<V, Hello>) {
          w.u8(v.n_streams);
          w.u32(v.dim);
          w.f32(v.frame_rate_hz);
        } else if constexpr (std::is_same_v<V, Error>) {
          w.str(v.message);
        } else if constexpr (std::is_same_v<V, Frame>) {
          w.u32(v.frame_index);
          w.f32s(v.values);
          w.u8(v.sys_active);
        } else if constexpr (std::is_same_v<V, Probs>) {
          w.u32(v.frame_index);
          for (float p : v.p) w.f32(p);
        } else if constexpr (std::is_same_v<V, Endpoint>) {
          w.u8(v.kind);
          w.u32(v.frame_index);
          w.u32(v.time_ms);
        }
      },
      m);
  const auto body = w.size() - 4;
  if (body > kMaxMessageBytes) throw ConfigError("message exceeds the 16 MiB cap");
  w.patch_u32(0, static_cast<std::uint32_t>(body));
  return w.take();
}

Message decode(std::span<const std::uint8_t> body, std::size_t frame_floats) {
  bytes::Reader r(body);
  const auto type = r.u8();
  Message m;
  switch (static_cast<Type>(type)) {
    case Type::Hello: {
      Hello h;
      h.n_streams = r.u8();
      h.dim = r.u32();
      h.frame_rate_hz = r.f32();
      m = h;
      break;
    }
    case Type::Ready: m = Ready{}; break;
    case Type::Error: m = Error{r.str(r.remaining())}; break;
    case Type::Frame: {
      Frame f;
      f.frame_index = r.u32();
      if (frame_floats == 0 && r.remaining() % 4 == 1) frame_floats = r.remaining() / 4;  // width not negotiated yet
      if (r.remaining() != frame_floats * 4 + 1) {
        throw FormatError("frame body carries " + std::to_string(r.remaining()) +
                              " bytes, expected " + std::to_string(frame_floats * 4 + 1),
                          r.offset());
      }
      f.values.resize(frame_floats);
      r.f32s(f.values);
      f.sys_active = r.u8();
      m = std::move(f);
      break;
    }
    case Type::Probs: {
      Probs p;
      p.frame_index = r.u32();
      for (float& v : p.p) v = r.f32();
      m = p;
      break;
    }
    case Type::Endpoint: {
      Endpoint e;
      e.kind = r.u8();
      e.frame_index = r.u32();
      e.time_ms = r.u32();
      m = e;
      break;
    }
    case Type::Bye: m = Bye{}; break;
    default:
      throw FormatError("unknown message type " + std::to_string(type), 0);
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in message", r.offset());
  return m;
}

void Parser::feed(std::span<const std::uint8_t> bytes) {
  if (pos_ > 0 && pos_ == buf_.size()) {
    buf_.clear();
    pos_ = 0;
  }
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> Parser::next() {
  if (buf_.size() - pos_ < 4) return std::nullopt;
  std::uint32_t len;
  std::memcpy(&len, buf_.data() + pos_, 4);
  if (len == 0 || len > kMaxMessageBytes) {
    throw FormatError("bad message length " + std::to_string(len), pos_);
  }
  if (buf_.size() - pos_ - 4 < len) return std::nullopt;
  auto m = decode(std::span<const std::uint8_t>(buf_.data() + pos_ + 4, len), frame_floats_);
  pos_ += 4 + len;
  if (pos_ > (1u << 16) && pos_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
  return m;
}

}  // namespace ep::wire
