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

#include "endpointer/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include <nlohmann/json.hpp>

#include "endpointer/feature_io.hpp"

namespace ep {

namespace fs = std::filesystem;

nlohmann::json synth_config_to_json(const SynthFeatureConfig& c) {
  return {{"dim", c.dim},
          {"clusters_per_speaker", c.clusters_per_speaker},
          {"speech_margin", c.speech_margin},
          {"speech_sigma", c.speech_sigma},
          {"silence_level", c.silence_level},
          {"silence_sigma", c.silence_sigma},
          {"mean_dwell_frames", c.mean_dwell_frames},
          {"final_cue_ms", c.final_cue_ms},
          {"final_cue_prob", c.final_cue_prob},
          {"pause_cue_prob", c.pause_cue_prob},
          {"frame_rate_hz", c.frame_rate_hz},
          {"rng_seed", c.rng_seed}};
}

SynthFeatureConfig synth_config_from_json(const nlohmann::json& j) {
  SynthFeatureConfig c;
  c.dim = j.value("dim", c.dim);
  c.clusters_per_speaker = j.value("clusters_per_speaker", c.clusters_per_speaker);
  c.speech_margin = j.value("speech_margin", c.speech_margin);
  c.speech_sigma = j.value("speech_sigma", c.speech_sigma);
  c.silence_level = j.value("silence_level", c.silence_level);
  c.silence_sigma = j.value("silence_sigma", c.silence_sigma);
  c.mean_dwell_frames = j.value("mean_dwell_frames", c.mean_dwell_frames);
  c.final_cue_ms = j.value("final_cue_ms", c.final_cue_ms);
  c.final_cue_prob = j.value("final_cue_prob", c.final_cue_prob);
  c.pause_cue_prob = j.value("pause_cue_prob", c.pause_cue_prob);
  c.frame_rate_hz = j.value("frame_rate_hz", c.frame_rate_hz);
  c.rng_seed = j.value("rng_seed", c.rng_seed);
  make_speaker_clusters(c);  // validates
  return c;
}

DialogueScript script_from_labels(const std::string& id, const LabelSequence& labels) {
  if (!(labels.frame_rate_hz > 0)) throw ConfigError("labels need a positive frame rate");
  const double period = frame_period_ms(labels.frame_rate_hz);
  auto ms = [&](std::size_t i) { return static_cast<std::int64_t>(std::llround(static_cast<double>(i) * period)); };
  DialogueScript s;
  s.dialogue_id = id;
  s.total_duration_ms = ms(labels.size());
  std::size_t i = 0;
  while (i < labels.size()) {
    const auto l = labels.labels[i];
    if (l != FrameLabel::User && l != FrameLabel::System) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < labels.size() && labels.labels[j] == l) ++j;
    s.turns.push_back({l == FrameLabel::User ? Speaker::User : Speaker::System, ms(i), ms(j), {}});
    i = j;
  }
  return s;
}

void write_dir_scripts(const std::string& dir, const std::vector<DialogueScript>& scripts) {
  fs::create_directories(dir);
  write_scripts((fs::path(dir) / "scripts.json").string(), scripts);
}

void write_split(const std::string& dir, const std::string& split,
                 const std::vector<LabeledDialogue>& dialogues) {
  const fs::path sub = fs::path(dir) / split;
  fs::create_directories(sub);
  for (const auto& d : dialogues) {
    write_epf1((sub / (d.script.dialogue_id + ".epf1")).string(), d.features, &d.labels);
  }
}

std::vector<LabeledDialogue> read_split(const std::string& dir, const std::string& split) {
  const fs::path sub = fs::path(dir) / split;
  if (!fs::is_directory(sub)) throw ConfigError("missing feature split directory " + sub.string());
  std::map<std::string, DialogueScript> scripts;
  if (const auto sp = fs::path(dir) / "scripts.json"; fs::exists(sp)) {
    for (auto& s : read_scripts(sp.string())) scripts.emplace(s.dialogue_id, std::move(s));
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(sub)) {
    if (e.path().extension() == ".epf1") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<LabeledDialogue> out;
  for (const auto& f : files) {
    auto file = read_epf1(f.string());
    if (!file.labels) throw ConfigError(f.string() + " has no frame labels");
    const std::string id = f.stem().string();
    LabeledDialogue d;
    d.features = std::move(file.features);
    d.labels = std::move(*file.labels);
    d.labels.frame_rate_hz = d.features.frame_rate_hz;
    if (auto it = scripts.find(id); it != scripts.end()) {
      d.script = it->second;
    } else {
      d.script = script_from_labels(id, d.labels);
    }
    d.activity.flags.reserve(d.labels.size());
    for (auto l : d.labels.labels) {
      d.activity.flags.push_back(l == FrameLabel::System ? Activity::SystemActive : Activity::NonSystem);
    }
    out.push_back(std::move(d));
  }
  if (out.empty()) throw ConfigError("no .epf1 files in " + sub.string());
  return out;
}

}  // namespace ep
