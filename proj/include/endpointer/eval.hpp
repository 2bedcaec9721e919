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
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "endpointer/corpus.hpp"
#include "endpointer/features.hpp"
#include "endpointer/model.hpp"

namespace ep {

enum class TurnClass { Valid, Cutoff, Miss };

const char* turn_class_name(TurnClass c);

// The span of frames in which a user turn's endpoint may fire: from the
// turn's first frame up to (not including) the next turn's first frame, or
// the end of the dialogue. `end_frame` is the first frame at or after the
// true end of speech, i.e. the first frame labelled UserEnd.
struct ArmedWindow {
  std::size_t turn_index = 0;
  std::int64_t begin = 0;
  std::int64_t end = 0;
  std::int64_t true_end_frame = 0;
};

std::vector<ArmedWindow> user_turn_windows(const DialogueScript& script, double frame_rate_hz,
                                           std::size_t num_frames);

// Latencies are measured in whole frames from the first UserEnd frame, so
// they are always multiples of the frame period.
struct TurnOutcome {
  std::string dialogue_id;
  std::size_t turn_index = 0;
  std::int64_t true_end_ms = 0;
  std::optional<std::int64_t> trigger_frame;
  double trigger_ms = std::numeric_limits<double>::quiet_NaN();
  double latency_ms = std::numeric_limits<double>::quiet_NaN();
  TurnClass kind = TurnClass::Miss;
};

// First frame in [begin, end) whose UserEnd probability is >= threshold.
std::optional<std::int64_t> first_crossing(const ProbMatrix& probs, std::int64_t begin,
                                           std::int64_t end, double threshold);

// Builds outcomes from one optional trigger frame per armed window.
std::vector<TurnOutcome> outcomes_from_triggers(
    const DialogueScript& script, double frame_rate_hz,
    const std::vector<ArmedWindow>& windows,
    const std::vector<std::optional<std::int64_t>>& triggers);

std::vector<TurnOutcome> evaluate_turns(const ProbMatrix& probs, const DialogueScript& script,
                                        double frame_rate_hz, double threshold);

struct MetricsRow {
  double threshold = 0.0;
  std::optional<double> ep50_ms;  // empty when no turn has a valid latency
  std::optional<double> ep90_ms;
  double ep_cutoff_pct = 0.0;
  double miss_rate_pct = 0.0;
  std::size_t n_turns = 0;
};

// Nearest-rank percentile: element ceil(q*n) (1-based) of the sorted values.
std::optional<double> nearest_rank(std::vector<double> values, double q);

MetricsRow aggregate(std::span<const TurnOutcome> outcomes, double threshold);

// Inclusive grid lo, lo+step, ..., hi, rounded to 1e-9 to avoid drift.
std::vector<double> threshold_grid(double lo, double hi, double step);
// Parses "lo:hi:step".
std::vector<double> parse_grid(const std::string& spec);

// One row per threshold (sorted ascending). `per_threshold`, when given,
// receives the outcomes behind every row.
std::vector<MetricsRow> sweep(const std::vector<ProbMatrix>& probs,
                              const std::vector<DialogueScript>& scripts, double frame_rate_hz,
                              std::vector<double> grid,
                              std::vector<std::vector<TurnOutcome>>* per_threshold = nullptr);

// Row whose ep50 equals the target: the largest such threshold, ties broken
// toward lower ep-cutoff. Failing an exact match, the row with the closest
// ep50 within `tolerance_ms` (then lower cutoff, then larger threshold).
std::optional<MetricsRow> operating_point(const std::vector<MetricsRow>& rows, double target_ms,
                                          double tolerance_ms = 0.0);

inline constexpr const char* kMetricsCsvHeader =
    "threshold,ep50_ms,ep90_ms,ep_cutoff_pct,miss_rate_pct,n_turns";

std::string metrics_csv(const std::vector<MetricsRow>& rows);
// Long-format plotting data: series (ep50|ep90), latency_ms, ep_cutoff_pct, threshold.
std::string curve_csv(const std::vector<MetricsRow>& rows);
nlohmann::json metrics_row_to_json(const MetricsRow& row);

struct CutoffBin {
  double lo_ms = 0.0;
  double hi_ms = 0.0;     // exclusive; +inf for the last bin
  bool in_speech = false;  // cutoffs not inside any mid-turn pause
  std::int64_t count = 0;
};

// Default duration edges: 0, 100, ..., 1000 ms plus an open-ended bin.
std::vector<double> default_bin_edges();

std::vector<CutoffBin> cutoff_error_bins(std::span<const TurnOutcome> outcomes,
                                         const std::vector<DialogueScript>& scripts,
                                         const std::vector<double>& edges = default_bin_edges());

std::string cutoff_bins_csv(const std::vector<CutoffBin>& bins);

struct Segment {
  double start_ms = 0.0;
  double end_ms = 0.0;
};

struct VadConfig {
  double energy_threshold = 0.5;
  double min_duration_ms = 80.0;
};

// Maximal runs of frames with energy below the threshold lasting at least
// the minimum duration.
std::vector<Segment> energy_vad(std::span<const double> energy, double frame_rate_hz,
                                const VadConfig& cfg = {});
std::vector<Segment> energy_vad(const FeatureSequence& seq, const VadConfig& cfg = {});

// Frame-level intersection over union of two segment sets.
double segments_iou(const std::vector<Segment>& a, const std::vector<Segment>& b,
                    double frame_rate_hz, std::size_t num_frames);

// Ground-truth silence (nobody voicing) as segments on the frame grid.
std::vector<Segment> script_silences(const DialogueScript& script, double frame_rate_hz,
                                     std::size_t num_frames);

}  // namespace ep
