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

#include "endpointer/feature_io.hpp"

#include "endpointer/bytes.hpp"

namespace ep {

std::vector<std::uint8_t> encode_epf1(const FeatureSequence& features,
                                      const LabelSequence* labels) {
  features.validate();
  if (labels && labels->size() != features.num_frames()) {
    throw ConfigError("label count does not match frame count");
  }
  bytes::Writer w;
  w.str("EPF1");
  w.u32(kEpf1Version);
  w.u8(static_cast<std::uint8_t>(features.n_streams()));
  w.u32(static_cast<std::uint32_t>(features.dim()));
  w.f32(features.frame_rate_hz);
  w.u32(static_cast<std::uint32_t>(features.num_frames()));
  w.u8(labels ? 1 : 0);
  for (const auto& s : features.streams) {
    w.f32s(std::span<const float>(s.data(), static_cast<std::size_t>(s.size())));
  }
  if (labels) {
    for (FrameLabel l : labels->labels) w.u8(static_cast<std::uint8_t>(l));
  }
  return w.take();
}

FeatureFile decode_epf1(std::span<const std::uint8_t> data) {
  bytes::Reader r(data);
  if (r.str(4) != "EPF1") throw FormatError("bad magic, expected EPF1", 0);
  const auto version = r.u32();
  if (version != kEpf1Version) {
    throw FormatError("unsupported EPF1 version " + std::to_string(version), 4);
  }
  const auto n_streams = r.u8();
  if (n_streams != 1 && n_streams != 2) {
    throw FormatError("n_streams must be 1 or 2", 8);
  }
  const auto dim = r.u32();
  const float rate = r.f32();
  if (!(rate > 0.0f)) throw FormatError("frame rate must be positive", 13);
  const auto frames = r.u32();
  const auto has_labels = r.u8();
  if (has_labels > 1) throw FormatError("has_labels must be 0 or 1", 21);

  const std::uint64_t payload =
      std::uint64_t{n_streams} * frames * dim * 4 + (has_labels ? frames : 0);
  if (r.remaining() < payload) {
    throw FormatError("truncated payload: need " + std::to_string(payload) +
                          " bytes, have " + std::to_string(r.remaining()),
                      r.offset());
  }
  FeatureFile out;
  out.features.frame_rate_hz = rate;
  for (int s = 0; s < n_streams; ++s) {
    FeatureMatrix m(frames, dim);
    r.f32s(std::span<float>(m.data(), static_cast<std::size_t>(m.size())));
    out.features.streams.push_back(std::move(m));
  }
  if (has_labels) {
    LabelSequence labels;
    labels.frame_rate_hz = rate;
    labels.labels.reserve(frames);
    for (std::uint32_t i = 0; i < frames; ++i) {
      const auto off = r.offset();
      const auto v = r.u8();
      if (v > 3 && v != 255) throw FormatError("invalid label value", off);
      labels.labels.push_back(static_cast<FrameLabel>(v));
    }
    out.labels = std::move(labels);
  }
  if (r.remaining() != 0) {
    throw FormatError("trailing bytes after payload", r.offset());
  }
  return out;
}

void write_epf1(const std::string& path, const FeatureSequence& features,
                const LabelSequence* labels) {
  bytes::write_file(path, encode_epf1(features, labels));
}

FeatureFile read_epf1(const std::string& path) {
  return decode_epf1(bytes::read_file(path));
}

}  // namespace ep
