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
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "endpointer/checkpoint.hpp"
#include "endpointer/common.hpp"
#include "endpointer/corpus.hpp"
#include "endpointer/features.hpp"

namespace ep {

enum class ControlToken { Pad, Unk };
enum class AgentState { Speaking, Listening, Responding };

const char* agent_state_name(AgentState s);

struct AgentConfig {
  IntRange opening_ms{1500, 3000};
  IntRange response_ms{1000, 2500};
  // Uncontrolled response policy: with probability `barge_in_prob` the agent
  // starts talking at a uniform point inside the query; otherwise it starts
  // `onset_delay_ms` +- U(`onset_jitter_ms`) after the query ends.
  double barge_in_prob = 0.4;
  std::int64_t onset_delay_ms = 1500;
  std::int64_t onset_jitter_ms = 1000;
  std::uint64_t rng_seed = 5;

  void validate() const;
};

struct AgentFrame {
  Eigen::VectorXf features;  // system-stream feature frame
  bool speech = false;
  AgentState state = AgentState::Listening;
};

// A dialogue agent reduced to its turn-taking behaviour: it speaks an
// opening message, listens, and responds either when its own policy says so
// or, under control, one step after an Unk token. A Pad token silences the
// current step and freezes the agent's progress.
class ScriptedAgent {
 public:
  ScriptedAgent(const AgentConfig& cfg, const SynthFeatureConfig& features, std::uint64_t seed);

  void begin_opening(std::int64_t frames);
  // Frame at which the uncontrolled policy starts responding.
  void schedule_onset(std::int64_t frame) { scheduled_onset_ = frame; }
  void set_response_frames(std::int64_t frames) { response_frames_ = frames; }

  AgentFrame step(std::optional<ControlToken> control);

  AgentState state() const { return state_; }
  std::int64_t frame_index() const { return frame_; }
  // First frame of the response, once it has started.
  std::optional<std::int64_t> response_onset() const { return onset_; }
  std::int64_t ignored_unk() const { return ignored_unk_; }

 private:
  Eigen::VectorXf speech_frame(std::int64_t remaining);
  Eigen::VectorXf silence_frame();

  SynthFeatureConfig fcfg_;
  std::vector<Eigen::VectorXf> clusters_;
  Rng rng_;
  AgentState state_ = AgentState::Listening;
  std::int64_t frame_ = 0;
  std::int64_t remaining_ = 0;
  std::int64_t response_frames_ = 25;
  std::optional<std::int64_t> scheduled_onset_;
  bool respond_next_ = false;
  std::optional<std::int64_t> onset_;
  int cluster_ = -1;
  bool cue_drawn_ = false;
  bool cue_on_ = false;
  std::int64_t ignored_unk_ = 0;
};

// One user query: a single user turn (with its mid-turn pauses) re-based to
// start at 0 ms.
struct Query {
  std::string id;
  DialogueScript script;
  std::int64_t duration_ms() const { return script.turns.front().end_ms; }
};

// The first user turn longer than `min_ms` from each of `n` freshly generated
// dialogues.
std::vector<Query> make_queries(const CorpusConfig& corpus, std::size_t n,
                                std::int64_t min_ms = 1000);

enum class DuplexMode { Baseline, Endpointer };

struct DuplexConfig {
  DuplexMode mode = DuplexMode::Baseline;
  // Endpointer mode: a two-stream model, or null for an oracle detector that
  // fires exactly at the true ends.
  std::shared_ptr<const ModelCheckpoint> model;
  double threshold = 0.9;
  IntRange pause_ms{200, 300};
  // Endpointer mode: how long to wait past the true end for a trigger before
  // releasing the agent anyway (counted as a fallback).
  std::int64_t max_wait_ms = 3000;
  // Give up on SystemEnd detection this long after the opening ends.
  std::int64_t system_end_timeout_ms = 2000;
  std::uint64_t seed = 3;
};

struct DuplexOutcome {
  std::string query_id;
  std::int64_t true_end_ms = 0;  // on the simulation clock
  double onset_ms = 0.0;
  double latency_ms = 0.0;  // whole frames from the first post-query frame
  bool cutoff = false;
  bool fallback = false;
  // Agent speech frames emitted while the user was voicing (endpointer mode
  // should keep this at zero before the trigger).
  std::int64_t overlap_frames = 0;
  std::optional<std::int64_t> trigger_frame;
  std::int64_t true_end_frame = 0;
};

struct DuplexSummary {
  std::size_t n = 0;
  std::optional<double> median_latency_ms;
  std::optional<double> p90_latency_ms;
  double cutoff_pct = 0.0;
  std::size_t fallbacks = 0;
};

struct DuplexResult {
  std::vector<DuplexOutcome> outcomes;
  DuplexSummary summary;
  std::size_t skipped = 0;
};

DuplexResult run_duplex(const std::vector<Query>& queries, const AgentConfig& agent,
                        const SynthFeatureConfig& features, const DuplexConfig& cfg);

DuplexSummary summarize(const std::vector<DuplexOutcome>& outcomes);
nlohmann::json duplex_summary_to_json(const DuplexSummary& s, DuplexMode mode);
std::string duplex_csv(const std::vector<DuplexOutcome>& outcomes);

}  // namespace ep
