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
#include <vector>

#include "endpointer/corpus.hpp"

namespace ep {

// Frame targets. Pad is a loss-mask sentinel and never a model output.
enum class FrameLabel : std::uint8_t {
  User = 0,
  UserEnd = 1,
  System = 2,
  SystemEnd = 3,
  Pad = 255,
};

inline constexpr int kNumClasses = 4;

inline int class_index(FrameLabel l) { return static_cast<int>(l); }

struct LabelSequence {
  std::vector<FrameLabel> labels;
  double frame_rate_hz = 25.0;
  int delay_tau = 0;

  std::size_t size() const { return labels.size(); }
};

enum class Activity : std::uint8_t { SystemActive = 0, NonSystem = 1 };

struct SystemActivitySequence {
  std::vector<Activity> flags;
};

// Frame i covers [i/fr, (i+1)/fr); a frame takes the label of whatever the
// script says is happening at its start time. Gaps carry the end label of the
// preceding turn; silence before the first turn is SystemEnd.
LabelSequence labels_from_script(const DialogueScript& script,
                                 double frame_rate_hz, std::size_t num_frames);

// Shifts targets right by `tau` frames, filling the head with Pad and
// dropping the last `tau` targets.
LabelSequence apply_label_delay(const LabelSequence& seq, int tau);

SystemActivitySequence system_activity_from_script(const DialogueScript& script,
                                                   double frame_rate_hz,
                                                   std::size_t num_frames);

// Frames needed to cover the whole script at the given rate.
std::size_t frames_for_script(const DialogueScript& script, double frame_rate_hz);

}  // namespace ep
