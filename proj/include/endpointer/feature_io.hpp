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
#include <vector>

#include "endpointer/features.hpp"
#include "endpointer/labels.hpp"

namespace ep {

// EPF1 layout (little-endian):
//   "EPF1" | u32 version=1 | u8 n_streams | u32 dim | f32 frame_rate_hz |
//   u32 num_frames | u8 has_labels |
//   n_streams x num_frames x dim f32 (row-major) |
//   [num_frames u8 labels, 0..3 or 255 = Pad]
inline constexpr std::uint32_t kEpf1Version = 1;
inline constexpr std::size_t kEpf1HeaderBytes = 22;

struct FeatureFile {
  FeatureSequence features;
  std::optional<LabelSequence> labels;
};

std::vector<std::uint8_t> encode_epf1(const FeatureSequence& features,
                                      const LabelSequence* labels = nullptr);
FeatureFile decode_epf1(std::span<const std::uint8_t> data);

void write_epf1(const std::string& path, const FeatureSequence& features,
                const LabelSequence* labels = nullptr);
FeatureFile read_epf1(const std::string& path);

}  // namespace ep
