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

#include "endpointer/detector.hpp"

#include <stdexcept>

#include "endpointer/common.hpp"

namespace ep {

DetectorSession::DetectorSession(std::shared_ptr<const ModelCheckpoint> model, double threshold,
                                 double frame_rate_hz, bool detect_system_end)
    : model_(std::move(model)),
      threshold_(threshold),
      rate_(frame_rate_hz),
      detect_system_end_(detect_system_end) {
  if (!model_) throw ConfigError("detector needs a model");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("threshold must lie strictly between 0 and 1");
  }
  if (!(frame_rate_hz > 0.0)) throw ConfigError("frame rate must be positive");
  state_ = zero_state<float>(model_->config, 1);
  inputs_.assign(static_cast<std::size_t>(model_->config.n_streams()),
                 Mat<float>::Zero(model_->config.input_dim, 1));
}

SessionStep DetectorSession::step(std::span<const float> frame,
                                  std::optional<Activity> sys_activity) {
  const std::span<const float> one[1] = {frame};
  return step(std::span<const std::span<const float>>(one, 1), sys_activity);
}

SessionStep DetectorSession::step(std::span<const std::span<const float>> frames,
                                  std::optional<Activity> sys_activity) {
  if (closed_) throw std::logic_error("step on a closed detector session");
  const auto& cfg = model_->config;
  if (static_cast<int>(frames.size()) != cfg.n_streams()) {
    throw ConfigError("expected " + std::to_string(cfg.n_streams()) + " streams per frame");
  }
  for (std::size_t s = 0; s < frames.size(); ++s) {
    if (static_cast<int>(frames[s].size()) != cfg.input_dim) {
      throw ConfigError("frame has dim " + std::to_string(frames[s].size()) + ", model expects " +
                        std::to_string(cfg.input_dim));
    }
    inputs_[s] = Eigen::Map<const Mat<float>>(frames[s].data(), cfg.input_dim, 1);
  }
  if (cfg.arch == Arch::SingleStream && !sys_activity) {
    throw ConfigError("single-stream detector needs the system activity flag");
  }
  if (sys_activity == Activity::SystemActive) user_armed_ = true;

  const int flag = static_cast<int>(sys_activity.value_or(Activity::NonSystem));
  const Mat<float> p = ep::step<float>(model_->params, cfg, inputs_,
                                       std::span<const int>(&flag, 1), state_);
  SessionStep out;
  for (int k = 0; k < 4; ++k) out.probs[static_cast<std::size_t>(k)] = p(k, 0);
  const double t_ms = static_cast<double>(frame_) * frame_period_ms(rate_);
  if (user_armed_ && p(class_index(FrameLabel::UserEnd), 0) >= threshold_) {
    out.events.push_back({EndpointKind::UserEnd, frame_, t_ms});
    user_armed_ = false;
  }
  if (detect_system_end_ && system_armed_ &&
      p(class_index(FrameLabel::SystemEnd), 0) >= threshold_) {
    out.events.push_back({EndpointKind::SystemEnd, frame_, t_ms});
    system_armed_ = false;
  }
  ++frame_;
  return out;
}

void DetectorSession::rearm(Speaker speaker) {
  (speaker == Speaker::User ? user_armed_ : system_armed_) = true;
}

void DetectorSession::disarm(Speaker speaker) {
  (speaker == Speaker::User ? user_armed_ : system_armed_) = false;
}

bool DetectorSession::armed(Speaker speaker) const {
  return speaker == Speaker::User ? user_armed_ : system_armed_;
}

std::optional<std::int64_t> first_at_or_above(std::span<const float> trace, double threshold) {
  for (std::size_t t = 0; t < trace.size(); ++t) {
    if (trace[t] >= threshold) return static_cast<std::int64_t>(t);
  }
  return std::nullopt;
}

std::vector<std::optional<std::int64_t>> stream_dialogue(
    std::shared_ptr<const ModelCheckpoint> model, const LabeledDialogue& d, double threshold,
    std::vector<std::array<float, 4>>* probs) {
  const double rate = d.features.frame_rate_hz;
  const auto n = d.num_frames();
  const auto windows = user_turn_windows(d.script, rate, n);
  std::vector<std::optional<std::int64_t>> triggers(windows.size());
  DetectorSession session(std::move(model), threshold, rate);
  std::vector<std::span<const float>> frames(d.features.n_streams());
  std::size_t next = 0;  // next window to open
  std::optional<std::size_t> open;
  if (probs) probs->clear();
  for (std::size_t t = 0; t < n; ++t) {
    const auto ti = static_cast<std::int64_t>(t);
    if (open && ti >= windows[*open].end) open.reset();
    while (next < windows.size() && windows[next].begin <= ti) {
      // Zero-length windows (turns shorter than a frame) never arm.
      if (windows[next].end > ti) {
        open = next;
        session.rearm(Speaker::User);
      }
      ++next;
    }
    for (std::size_t s = 0; s < frames.size(); ++s) {
      frames[s] = std::span<const float>(d.features.streams[s].row(static_cast<Eigen::Index>(t)).data(),
                                         d.features.dim());
    }
    const auto out = session.step(frames, d.activity.flags[t]);
    if (probs) probs->push_back(out.probs);
    for (const auto& e : out.events) {
      if (e.kind == EndpointKind::UserEnd && open && !triggers[*open]) {
        triggers[*open] = e.frame_index;
      }
    }
  }
  return triggers;
}

}  // namespace ep
