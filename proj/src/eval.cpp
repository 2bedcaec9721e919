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

#include "endpointer/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "endpointer/common.hpp"

namespace ep {
namespace {

std::string fmt_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s(buf);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s == "-0" ? "0" : s;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt_num(*v) : "NA"; }

}  // namespace

const char* turn_class_name(TurnClass c) {
  switch (c) {
    case TurnClass::Valid: return "valid";
    case TurnClass::Cutoff: return "cutoff";
    case TurnClass::Miss: return "miss";
  }
  return "?";
}

std::vector<ArmedWindow> user_turn_windows(const DialogueScript& script, double rate,
                                           std::size_t num_frames) {
  std::vector<ArmedWindow> out;
  const auto n = static_cast<std::int64_t>(num_frames);
  for (std::size_t k = 0; k < script.turns.size(); ++k) {
    const Turn& t = script.turns[k];
    if (t.speaker != Speaker::User) continue;
    ArmedWindow w;
    w.turn_index = k;
    w.begin = std::min(n, frame_at_or_after(static_cast<double>(t.start_ms), rate));
    w.end = k + 1 < script.turns.size()
                ? std::min(n, frame_at_or_after(static_cast<double>(script.turns[k + 1].start_ms), rate))
                : n;
    w.true_end_frame = frame_at_or_after(static_cast<double>(t.end_ms), rate);
    out.push_back(w);
  }
  return out;
}

std::optional<std::int64_t> first_crossing(const ProbMatrix& probs, std::int64_t begin,
                                           std::int64_t end, double threshold) {
  const auto user_end = class_index(FrameLabel::UserEnd);
  end = std::min<std::int64_t>(end, probs.rows());
  for (std::int64_t t = std::max<std::int64_t>(begin, 0); t < end; ++t) {
    if (probs(t, user_end) >= threshold) return t;
  }
  return std::nullopt;
}

std::vector<TurnOutcome> outcomes_from_triggers(
    const DialogueScript& script, double rate, const std::vector<ArmedWindow>& windows,
    const std::vector<std::optional<std::int64_t>>& triggers) {
  if (windows.size() != triggers.size()) throw ConfigError("one trigger slot per window expected");
  const double period = frame_period_ms(rate);
  std::vector<TurnOutcome> out;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto& w = windows[i];
    TurnOutcome o;
    o.dialogue_id = script.dialogue_id;
    o.turn_index = w.turn_index;
    o.true_end_ms = script.turns[w.turn_index].end_ms;
    if (triggers[i]) {
      o.trigger_frame = triggers[i];
      o.trigger_ms = static_cast<double>(*triggers[i]) * period;
      o.latency_ms = static_cast<double>(*triggers[i] - w.true_end_frame) * period;
      o.kind = o.latency_ms < 0 ? TurnClass::Cutoff : TurnClass::Valid;
    }
    out.push_back(o);
  }
  return out;
}

std::vector<TurnOutcome> evaluate_turns(const ProbMatrix& probs, const DialogueScript& script,
                                        double rate, double threshold) {
  const auto n = static_cast<std::size_t>(probs.rows());
  if (n != frames_for_script(script, rate)) {
    throw ConfigError("probabilities for " + script.dialogue_id + " do not cover the script");
  }
  const auto windows = user_turn_windows(script, rate, n);
  std::vector<std::optional<std::int64_t>> triggers;
  for (const auto& w : windows) triggers.push_back(first_crossing(probs, w.begin, w.end, threshold));
  return outcomes_from_triggers(script, rate, windows, triggers);
}

std::optional<double> nearest_rank(std::vector<double> values, double q) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size()) - 1e-9));
  idx = std::clamp<std::size_t>(idx, 1, values.size());
  return values[idx - 1];
}

MetricsRow aggregate(std::span<const TurnOutcome> outcomes, double threshold) {
  if (outcomes.empty()) throw ConfigError("no turns to aggregate");
  MetricsRow row;
  row.threshold = threshold;
  row.n_turns = outcomes.size();
  std::vector<double> valid;
  std::size_t cutoffs = 0, misses = 0;
  for (const auto& o : outcomes) {
    switch (o.kind) {
      case TurnClass::Valid: valid.push_back(o.latency_ms); break;
      case TurnClass::Cutoff: ++cutoffs; break;
      case TurnClass::Miss: ++misses; break;
    }
  }
  row.ep50_ms = nearest_rank(valid, 0.5);
  row.ep90_ms = nearest_rank(valid, 0.9);
  row.ep_cutoff_pct = 100.0 * static_cast<double>(cutoffs) / static_cast<double>(row.n_turns);
  row.miss_rate_pct = 100.0 * static_cast<double>(misses) / static_cast<double>(row.n_turns);
  return row;
}

std::vector<double> threshold_grid(double lo, double hi, double step) {
  if (!(step > 0) || !(lo > 0) || !(hi < 1) || lo > hi) {
    throw ConfigError("threshold grid must satisfy 0 < lo <= hi < 1 and step > 0");
  }
  std::vector<double> g;
  for (long k = 0;; ++k) {
    const double v = std::round((lo + static_cast<double>(k) * step) * 1e9) / 1e9;
    if (v > hi + 1e-12) break;
    g.push_back(v);
  }
  return g;
}

std::vector<double> parse_grid(const std::string& spec) {
  double lo = 0, hi = 0, step = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(spec);
  if (!(in >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' || !(in >> std::ws).eof()) {
    throw ConfigError("grid must look like lo:hi:step, got '" + spec + "'");
  }
  return threshold_grid(lo, hi, step);
}

std::vector<MetricsRow> sweep(const std::vector<ProbMatrix>& probs,
                              const std::vector<DialogueScript>& scripts, double rate,
                              std::vector<double> grid,
                              std::vector<std::vector<TurnOutcome>>* per_threshold) {
  if (grid.empty()) throw ConfigError("empty threshold grid");
  if (probs.size() != scripts.size()) throw ConfigError("one probability matrix per script expected");
  for (double g : grid) {
    if (!(g > 0 && g < 1)) throw ConfigError("thresholds must lie in (0, 1)");
  }
  std::sort(grid.begin(), grid.end());
  std::vector<MetricsRow> rows;
  if (per_threshold) per_threshold->clear();
  for (double th : grid) {
    std::vector<TurnOutcome> all;
    for (std::size_t k = 0; k < scripts.size(); ++k) {
      auto o = evaluate_turns(probs[k], scripts[k], rate, th);
      all.insert(all.end(), o.begin(), o.end());
    }
    rows.push_back(aggregate(all, th));
    if (per_threshold) per_threshold->push_back(std::move(all));
  }
  return rows;
}

std::optional<MetricsRow> operating_point(const std::vector<MetricsRow>& rows, double target_ms,
                                          double tolerance_ms) {
  std::optional<MetricsRow> best;
  double best_gap = 0;
  for (const auto& r : rows) {
    if (!r.ep50_ms) continue;
    const double gap = std::abs(*r.ep50_ms - target_ms);
    if (gap > tolerance_ms + 1e-9) continue;
    const bool better =
        !best || gap < best_gap - 1e-9 ||
        (std::abs(gap - best_gap) <= 1e-9 &&
         (r.ep_cutoff_pct < best->ep_cutoff_pct ||
          (r.ep_cutoff_pct == best->ep_cutoff_pct && r.threshold > best->threshold)));
    if (better) {
      best = r;
      best_gap = gap;
    }
  }
  return best;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = std::string(kMetricsCsvHeader) + "\n";
  for (const auto& r : rows) {
    char th[32];
    std::snprintf(th, sizeof th, "%.2f", r.threshold);
    out += std::string(th) + "," + fmt_opt(r.ep50_ms) + "," + fmt_opt(r.ep90_ms) + "," +
           fmt_num(r.ep_cutoff_pct) + "," + fmt_num(r.miss_rate_pct) + "," +
           std::to_string(r.n_turns) + "\n";
  }
  return out;
}

std::string curve_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "series,latency_ms,ep_cutoff_pct,threshold\n";
  for (const char* series : {"ep50", "ep90"}) {
    for (const auto& r : rows) {
      const auto& v = std::string(series) == "ep50" ? r.ep50_ms : r.ep90_ms;
      if (!v) continue;
      char th[32];
      std::snprintf(th, sizeof th, "%.2f", r.threshold);
      out += std::string(series) + "," + fmt_num(*v) + "," + fmt_num(r.ep_cutoff_pct) + "," + th + "\n";
    }
  }
  return out;
}

nlohmann::json metrics_row_to_json(const MetricsRow& r) {
  nlohmann::json j = {{"threshold", r.threshold},
                      {"ep_cutoff_pct", r.ep_cutoff_pct},
                      {"miss_rate_pct", r.miss_rate_pct},
                      {"n_turns", r.n_turns}};
  j["ep50_ms"] = r.ep50_ms ? nlohmann::json(*r.ep50_ms) : nlohmann::json("NA");
  j["ep90_ms"] = r.ep90_ms ? nlohmann::json(*r.ep90_ms) : nlohmann::json("NA");
  return j;
}

std::vector<double> default_bin_edges() {
  std::vector<double> e;
  for (int k = 0; k <= 10; ++k) e.push_back(100.0 * k);
  return e;
}

std::vector<CutoffBin> cutoff_error_bins(std::span<const TurnOutcome> outcomes,
                                         const std::vector<DialogueScript>& scripts,
                                         const std::vector<double>& edges) {
  if (edges.empty() || !std::is_sorted(edges.begin(), edges.end()) || edges.front() < 0) {
    throw ConfigError("bin edges must be non-negative and ascending");
  }
  std::vector<CutoffBin> bins;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    bins.push_back({edges[i],
                    i + 1 < edges.size() ? edges[i + 1] : std::numeric_limits<double>::infinity(),
                    false, 0});
  }
  bins.push_back({0.0, 0.0, true, 0});
  std::map<std::string, const DialogueScript*> by_id;
  for (const auto& s : scripts) by_id[s.dialogue_id] = &s;

  for (const auto& o : outcomes) {
    if (o.kind != TurnClass::Cutoff) continue;
    std::optional<double> duration;
    if (auto it = by_id.find(o.dialogue_id); it != by_id.end() && o.turn_index < it->second->turns.size()) {
      for (const auto& p : it->second->turns[o.turn_index].pauses) {
        if (o.trigger_ms >= static_cast<double>(p.start_ms) && o.trigger_ms < static_cast<double>(p.end_ms)) {
          duration = static_cast<double>(p.duration());
          break;
        }
      }
    }
    if (!duration || *duration < edges.front()) {
      ++bins.back().count;
      continue;
    }
    for (std::size_t i = 0; i + 1 < bins.size(); ++i) {
      if (*duration >= bins[i].lo_ms && *duration < bins[i].hi_ms) {
        ++bins[i].count;
        break;
      }
    }
  }
  return bins;
}

std::string cutoff_bins_csv(const std::vector<CutoffBin>& bins) {
  std::string out = "bin,lo_ms,hi_ms,count\n";
  for (const auto& b : bins) {
    if (b.in_speech) {
      out += "in_speech,NA,NA," + std::to_string(b.count) + "\n";
    } else {
      out += "pause," + fmt_num(b.lo_ms) + "," + (std::isinf(b.hi_ms) ? std::string("inf") : fmt_num(b.hi_ms)) +
             "," + std::to_string(b.count) + "\n";
    }
  }
  return out;
}

std::vector<Segment> energy_vad(std::span<const double> energy, double rate, const VadConfig& cfg) {
  const double period = frame_period_ms(rate);
  std::vector<Segment> out;
  std::size_t i = 0;
  while (i < energy.size()) {
    if (energy[i] >= cfg.energy_threshold) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < energy.size() && energy[j] < cfg.energy_threshold) ++j;
    const double start = static_cast<double>(i) * period, end = static_cast<double>(j) * period;
    if (end - start >= cfg.min_duration_ms - 1e-9) out.push_back({start, end});
    i = j;
  }
  return out;
}

std::vector<Segment> energy_vad(const FeatureSequence& seq, const VadConfig& cfg) {
  if (seq.n_streams() != 1) throw ConfigError("energy VAD expects a mono feature stream");
  const auto e = frame_energy(seq);
  return energy_vad(e, seq.frame_rate_hz, cfg);
}

namespace {

std::vector<bool> frame_mask(const std::vector<Segment>& segs, double rate, std::size_t n) {
  std::vector<bool> m(n, false);
  const double period = frame_period_ms(rate);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) * period;
    for (const auto& s : segs) {
      if (t >= s.start_ms - 1e-9 && t < s.end_ms - 1e-9) {
        m[i] = true;
        break;
      }
    }
  }
  return m;
}

}  // namespace

double segments_iou(const std::vector<Segment>& a, const std::vector<Segment>& b, double rate,
                    std::size_t n) {
  const auto ma = frame_mask(a, rate, n), mb = frame_mask(b, rate, n);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < n; ++i) {
    inter += ma[i] && mb[i];
    uni += ma[i] || mb[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Segment> script_silences(const DialogueScript& script, double rate, std::size_t n) {
  const double period = frame_period_ms(rate);
  std::vector<Segment> out;
  std::optional<std::size_t> run;
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) * period;
    const bool silent = i < n && !is_voiced(script, Speaker::User, t) && !is_voiced(script, Speaker::System, t);
    if (silent && !run) run = i;
    if (!silent && run) {
      out.push_back({static_cast<double>(*run) * period, t});
      run.reset();
    }
  }
  return out;
}

}  // namespace ep
