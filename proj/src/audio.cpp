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

#include "endpointer/audio.hpp"

#include <cstring>

#include "endpointer/bytes.hpp"
#include "endpointer/common.hpp"

namespace ep {

Waveform read_wav(const std::string& path) {
  const auto data = bytes::read_file(path);
  bytes::Reader r(data);
  if (r.str(4) != "RIFF") throw FormatError("not a RIFF file", 0);
  r.u32();
  if (r.str(4) != "WAVE") throw FormatError("not a WAVE file", 8);
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (r.remaining() >= 8) {
    const auto chunk_at = r.offset();
    const std::string id = r.str(4);
    const std::uint32_t size = r.u32();
    if (size > r.remaining()) throw FormatError("chunk '" + id + "' overruns the file", chunk_at);
    const auto body = r.offset();
    if (id == "fmt ") {
      if (size < 16) throw FormatError("short fmt chunk", chunk_at);
      const std::string f = r.str(16);
      std::memcpy(&format, f.data(), 2);
      std::memcpy(&channels, f.data() + 2, 2);
      std::memcpy(&rate, f.data() + 4, 4);
      std::memcpy(&bits, f.data() + 14, 2);
      have_fmt = true;
      r.str(size - 16);
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk", chunk_at);
      if (channels == 0) throw FormatError("zero channels", chunk_at);
      const bool pcm16 = format == 1 && bits == 16;
      const bool f32 = format == 3 && bits == 32;
      if (!pcm16 && !f32) throw FormatError("only 16-bit PCM and 32-bit float WAV are supported", body);
      const std::size_t width = bits / 8u;
      const std::size_t frames = size / (width * channels);
      const std::string raw = r.str(size);
      Waveform w;
      w.sample_rate = static_cast<int>(rate);
      w.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        float acc = 0.0f;
        for (std::size_t c = 0; c < channels; ++c) {
          const char* p = raw.data() + (i * channels + c) * width;
          if (pcm16) {
            std::int16_t v;
            std::memcpy(&v, p, 2);
            acc += static_cast<float>(v) / 32768.0f;
          } else {
            float v;
            std::memcpy(&v, p, 4);
            acc += v;
          }
        }
        w.samples[i] = acc / static_cast<float>(channels);
      }
      return w;
    } else {
      r.str(size);
    }
    if (size % 2 == 1 && r.remaining() > 0) r.u8();
    (void)body;
  }
  throw FormatError("no data chunk", data.size());
}

}  // namespace ep
