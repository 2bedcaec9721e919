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

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "endpointer/checkpoint.hpp"
#include "endpointer/eval.hpp"
#include "endpointer/training.hpp"

namespace ep {

// Wire values match the class index of the end label.
enum class EndpointKind : std::uint8_t { UserEnd = 1, SystemEnd = 3 };

struct EndpointEvent {
  EndpointKind kind = EndpointKind::UserEnd;
  std::int64_t frame_index = 0;
  double time_ms = 0.0;
};

struct SessionStep {
  std::array<float, 4> probs{};
  std::vector<EndpointEvent> events;
};

// One streaming dialogue. Fires UserEnd on the first frame at which
// p[UserEnd] >= threshold while armed, then disarms until re-armed
// explicitly or by observed system activity. SystemEnd detection is the
// mirror image and is off unless enabled.
class DetectorSession {
 public:
  DetectorSession(std::shared_ptr<const ModelCheckpoint> model, double threshold,
                  double frame_rate_hz, bool detect_system_end = false);

  // `frames` holds one D-vector per model stream. Single-stream models need
  // the system activity flag.
  SessionStep step(std::span<const std::span<const float>> frames,
                   std::optional<Activity> sys_activity);
  SessionStep step(std::span<const float> frame, std::optional<Activity> sys_activity);

  void rearm(Speaker speaker);
  void disarm(Speaker speaker);
  bool armed(Speaker speaker) const;
  void close() { closed_ = true; }
  bool closed() const { return closed_; }

  std::int64_t frame_index() const { return frame_; }
  double threshold() const { return threshold_; }
  double frame_rate_hz() const { return rate_; }
  const ModelConfig& config() const { return model_->config; }

 private:
  std::shared_ptr<const ModelCheckpoint> model_;
  double threshold_;
  double rate_;
  bool detect_system_end_;
  RecurrentState<float> state_;
  std::vector<Mat<float>> inputs_;
  bool user_armed_ = true;
  bool system_armed_ = false;
  bool closed_ = false;
  std::int64_t frame_ = 0;
};

// Offline reference for one armed interval: first index at or above the
// threshold.
std::optional<std::int64_t> first_at_or_above(std::span<const float> trace, double threshold);

// Streams a whole dialogue through a session, re-arming the user detector at
// each user turn's first frame, and returns the trigger (if any) inside each
// user turn's armed window, in the same order as user_turn_windows().
std::vector<std::optional<std::int64_t>> stream_dialogue(
    std::shared_ptr<const ModelCheckpoint> model, const LabeledDialogue& dialogue,
    double threshold, std::vector<std::array<float, 4>>* probs = nullptr);

}  // namespace ep
