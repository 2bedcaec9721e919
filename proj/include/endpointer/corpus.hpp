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
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace ep {

enum class Speaker : std::uint8_t { User, System };

struct Interval {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::int64_t duration() const { return end_ms - start_ms; }
  bool operator==(const Interval&) const = default;
};

struct Turn {
  Speaker speaker = Speaker::User;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  // Mid-turn silences, sorted, disjoint, strictly inside [start_ms, end_ms).
  std::vector<Interval> pauses;

  bool operator==(const Turn&) const = default;
  // Turn length minus the pauses.
  std::int64_t voiced_ms() const;
};

struct DialogueScript {
  std::string dialogue_id;
  std::vector<Turn> turns;
  std::int64_t total_duration_ms = 0;

  bool operator==(const DialogueScript&) const = default;
};

struct IntRange {
  std::int64_t min = 0;
  std::int64_t max = 0;
  double midpoint() const { return 0.5 * static_cast<double>(min + max); }
};

// Parameters of the synthetic dialogue generator. `turn_duration_ms` is the
// voiced length of a turn; its pauses are inserted on top of it, so the
// turn's span is voiced length plus pause total.
struct CorpusConfig {
  std::int64_t n_dialogues = 450;
  IntRange turns_per_dialogue{2, 8};
  IntRange turn_duration_ms{800, 6000};
  IntRange pause_duration_ms{80, 900};
  IntRange pauses_per_turn{0, 3};
  IntRange gap_ms{200, 1500};
  // Shortest voiced stretch before, between and after pauses.
  std::int64_t min_voiced_segment_ms = 100;
  // Relative sizes of train / valid / test; the default gives 300/50/100.
  double split_train = 6.0;
  double split_valid = 1.0;
  double split_test = 2.0;
  std::uint64_t rng_seed = 1;

  // Throws ConfigError when a range is empty or otherwise unusable.
  void validate() const;
};

struct Corpus {
  std::vector<DialogueScript> train;
  std::vector<DialogueScript> valid;
  std::vector<DialogueScript> test;

  std::vector<DialogueScript> all() const;
};

DialogueScript generate_dialogue(const CorpusConfig& cfg, std::uint64_t index);
Corpus generate_corpus(const CorpusConfig& cfg);

// Throws ConfigError describing the first violated invariant.
void check_script(const DialogueScript& script);

struct Histogram {
  explicit Histogram(std::int64_t width = 1) : bin_width(width) {}

  std::int64_t bin_width = 1;
  // bin lower edge -> count
  std::map<std::int64_t, std::int64_t> bins;
  std::int64_t count = 0;
  double mean = 0.0;

  void add(std::int64_t value);
};

struct ScriptStats {
  std::int64_t n_dialogues = 0;
  std::int64_t n_turns = 0;
  std::int64_t n_user_turns = 0;
  Histogram turns_per_dialogue{1};
  Histogram voiced_ms{100};
  Histogram pauses_per_turn{1};
  Histogram pause_ms{100};
  Histogram gap_ms{100};
};

ScriptStats script_stats(const std::vector<DialogueScript>& scripts);

// JSON script file: {"dialogues":[{"id":..., "turns":[...]}]}
nlohmann::json scripts_to_json(const std::vector<DialogueScript>& scripts);
std::vector<DialogueScript> scripts_from_json(const nlohmann::json& doc);
void write_scripts(const std::string& path,
                   const std::vector<DialogueScript>& scripts);
std::vector<DialogueScript> read_scripts(const std::string& path);

CorpusConfig corpus_config_from_json(const nlohmann::json& doc);
nlohmann::json corpus_config_to_json(const CorpusConfig& cfg);
nlohmann::json stats_to_json(const ScriptStats& stats);

}  // namespace ep
