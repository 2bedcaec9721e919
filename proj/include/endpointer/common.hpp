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

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace ep {

using Rng = std::mt19937_64;

// Invalid configuration, ranges or arguments.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed on-disk or on-wire data. `offset` is the byte position at which
// the problem was detected.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

// Derives an independent stream seed from a base seed and a salt, so that
// consumers seeded from one user-facing seed do not share sequences.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Index of the first frame whose start time is at or after `ms`.
inline std::int64_t frame_at_or_after(double ms, double frame_rate_hz) {
  // small epsilon keeps exact multiples (e.g. 200 ms at 25 Hz) on their frame
  double f = ms * frame_rate_hz / 1000.0;
  return static_cast<std::int64_t>(std::ceil(f - 1e-9));
}

inline double frame_period_ms(double frame_rate_hz) {
  return 1000.0 / frame_rate_hz;
}

}  // namespace ep
