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

#include "endpointer/labels.hpp"

#include <cmath>
#include <string>

#include "endpointer/common.hpp"

namespace ep {

namespace {

void check_rate(double frame_rate_hz) {
  if (!(frame_rate_hz > 0.0) || !std::isfinite(frame_rate_hz)) {
    throw ConfigError("frame rate must be positive, got " +
                      std::to_string(frame_rate_hz));
  }
}

}  // namespace

std::size_t frames_for_script(const DialogueScript& script, double frame_rate_hz) {
  check_rate(frame_rate_hz);
  return static_cast<std::size_t>(std::ceil(
      static_cast<double>(script.total_duration_ms) * frame_rate_hz / 1000.0 -
      1e-9));
}

LabelSequence labels_from_script(const DialogueScript& script,
                                 double frame_rate_hz, std::size_t num_frames) {
  check_rate(frame_rate_hz);
  LabelSequence out;
  out.frame_rate_hz = frame_rate_hz;
  out.labels.assign(num_frames, FrameLabel::SystemEnd);
  // Sweep turns in order; each turn owns the frames from its start until the
  // next turn's start (voiced part, then the trailing gap).
  const auto& turns = script.turns;
  for (std::size_t k = 0; k < turns.size(); ++k) {
    const Turn& t = turns[k];
    const bool user = t.speaker == Speaker::User;
    auto begin = frame_at_or_after(static_cast<double>(t.start_ms), frame_rate_hz);
    auto end = frame_at_or_after(static_cast<double>(t.end_ms), frame_rate_hz);
    auto next = k + 1 < turns.size()
                    ? frame_at_or_after(static_cast<double>(turns[k + 1].start_ms),
                                        frame_rate_hz)
                    : static_cast<std::int64_t>(num_frames);
    const auto n = static_cast<std::int64_t>(num_frames);
    for (auto i = begin; i < std::min(end, n); ++i) {
      out.labels[static_cast<std::size_t>(i)] =
          user ? FrameLabel::User : FrameLabel::System;
    }
    for (auto i = end; i < std::min(next, n); ++i) {
      out.labels[static_cast<std::size_t>(i)] =
          user ? FrameLabel::UserEnd : FrameLabel::SystemEnd;
    }
  }
  return out;
}

LabelSequence apply_label_delay(const LabelSequence& seq, int tau) {
  if (tau < 0 || static_cast<std::size_t>(tau) > seq.labels.size()) {
    throw ConfigError("label delay " + std::to_string(tau) +
                      " outside [0, " + std::to_string(seq.labels.size()) + "]");
  }
  LabelSequence out;
  out.frame_rate_hz = seq.frame_rate_hz;
  out.delay_tau = seq.delay_tau + tau;
  out.labels.assign(seq.labels.size(), FrameLabel::Pad);
  for (std::size_t t = static_cast<std::size_t>(tau); t < seq.labels.size(); ++t) {
    out.labels[t] = seq.labels[t - static_cast<std::size_t>(tau)];
  }
  return out;
}

SystemActivitySequence system_activity_from_script(const DialogueScript& script,
                                                   double frame_rate_hz,
                                                   std::size_t num_frames) {
  check_rate(frame_rate_hz);
  SystemActivitySequence out;
  out.flags.assign(num_frames, Activity::NonSystem);
  const auto n = static_cast<std::int64_t>(num_frames);
  for (const Turn& t : script.turns) {
    if (t.speaker != Speaker::System) continue;
    auto begin = frame_at_or_after(static_cast<double>(t.start_ms), frame_rate_hz);
    auto end = frame_at_or_after(static_cast<double>(t.end_ms), frame_rate_hz);
    for (auto i = begin; i < std::min(end, n); ++i) {
      out.flags[static_cast<std::size_t>(i)] = Activity::SystemActive;
    }
  }
  return out;
}

}  // namespace ep
