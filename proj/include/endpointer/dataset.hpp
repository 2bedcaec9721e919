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

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "endpointer/features.hpp"
#include "endpointer/training.hpp"

namespace ep {

nlohmann::json synth_config_to_json(const SynthFeatureConfig& cfg);
SynthFeatureConfig synth_config_from_json(const nlohmann::json& j);

// Best-effort script reconstructed from frame labels: each maximal run of
// User or System frames becomes a turn. Mid-turn pauses are not recoverable
// from labels and are left empty.
DialogueScript script_from_labels(const std::string& id, const LabelSequence& labels);

// Feature directory layout: <dir>/scripts.json (all dialogue scripts, when
// known) and <dir>/<split>/<dialogue id>.epf1 with frame labels.
void write_split(const std::string& dir, const std::string& split,
                 const std::vector<LabeledDialogue>& dialogues);
std::vector<LabeledDialogue> read_split(const std::string& dir, const std::string& split);
void write_dir_scripts(const std::string& dir, const std::vector<DialogueScript>& scripts);

}  // namespace ep
