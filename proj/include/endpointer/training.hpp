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
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "endpointer/checkpoint.hpp"
#include "endpointer/common.hpp"
#include "endpointer/corpus.hpp"
#include "endpointer/features.hpp"
#include "endpointer/labels.hpp"

namespace ep {

// A dialogue with its features and undelayed frame-level ground truth.
struct LabeledDialogue {
  DialogueScript script;
  FeatureSequence features;
  LabelSequence labels;
  SystemActivitySequence activity;

  std::size_t num_frames() const { return features.num_frames(); }
};

LabeledDialogue label_dialogue(const DialogueScript& script, FeatureSequence features);

// Renders and labels every script.
std::vector<LabeledDialogue> build_dataset(const std::vector<DialogueScript>& scripts,
                                           const SynthFeatureConfig& cfg,
                                           StreamMode mode);

struct TrainConfig {
  int epochs = 50;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double window_s = 40.0;
  int batch_size = 8;
  int delay_tau = 0;
  double clip_norm = 5.0;
  // Windows drawn per epoch; 0 means one per training dialogue.
  int windows_per_epoch = 0;
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct Window {
  std::size_t dialogue = 0;
  std::size_t start_frame = 0;
  std::size_t length = 0;
};

// Window starting at the first frame of a uniformly chosen turn, at most
// `window_s` long.
Window sample_window(const LabeledDialogue& d, std::size_t index, double window_s, Rng& rng);

// Window-local features, flags and targets; the delay is applied after
// slicing so every window starts with `tau` Pad targets.
SequenceExample make_example(const LabeledDialogue& d, const Window& w, int tau);

// Whole dialogue as one example.
SequenceExample full_example(const LabeledDialogue& d, int tau);

struct ValidationResult {
  std::array<std::array<std::int64_t, kNumClasses>, kNumClasses> confusion{};  // [truth][pred]
  std::array<double, kNumClasses> recall{};
  std::array<bool, kNumClasses> present{};
  // Mean recall over User and UserEnd (whichever are present).
  double score = 0.0;
};

// Frame-level argmax recall against tau-delayed labels.
ValidationResult score_predictions(const std::vector<ProbMatrix>& probs,
                                   const std::vector<LabelSequence>& delayed);
ValidationResult validate(const ModelCheckpoint& ckpt,
                          const std::vector<LabeledDialogue>& dialogues, int tau);

// Per-dialogue forward(); identical arithmetic to a streaming session.
std::vector<ProbMatrix> forward_many(const Params<float>& params, const ModelConfig& cfg,
                                     const std::vector<LabeledDialogue>& dialogues);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double grad_norm = 0.0;
  double valid_score = 0.0;
  std::array<double, kNumClasses> valid_recall{};
  double seconds = 0.0;
};

nlohmann::json epoch_log_to_json(const EpochLog& log);

struct TrainResult {
  ModelCheckpoint best;
  ModelCheckpoint last;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Trains from `init` (fresh or fine-tune) and keeps the checkpoint with the
// highest validation score; ties keep the earlier epoch.
TrainResult train(const std::vector<LabeledDialogue>& train_set,
                  const std::vector<LabeledDialogue>& valid_set, ModelCheckpoint init,
                  const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace ep
