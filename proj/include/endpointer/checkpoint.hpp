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

#include "endpointer/model.hpp"

namespace ep {

struct TrainingMeta {
  int epoch = 0;
  double validation_score = 0.0;
  int delay_tau = 0;
  std::string feature_provenance;
  double frame_rate_hz = 0.0;  // 0 when unknown
};

struct ModelCheckpoint {
  ModelConfig config;
  Params<float> params;
  TrainingMeta meta;
  std::optional<AdamState<float>> adam;
};

ModelCheckpoint init_model(const ModelConfig& config);

// EPCK container: "EPCK" | u32 version | u32 json_len | JSON header |
// u32 n_tensors | per tensor: u32 name_len, name, u32 rows, u32 cols,
// rows*cols f32 (column-major). Adam moments, when saved, are stored as
// tensors prefixed "adam.m." and "adam.v.".
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ModelCheckpoint& ckpt,
                                            bool with_adam = false);
ModelCheckpoint decode_checkpoint(std::span<const std::uint8_t> data);

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt,
                     bool with_adam = false);
ModelCheckpoint load_checkpoint(const std::string& path);

// Loads a checkpoint to continue training under `expected`; throws ConfigError
// if the stored architecture differs.
ModelCheckpoint load_for_finetune(const std::string& path, const ModelConfig& expected);

}  // namespace ep
