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

#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "endpointer/common.hpp"
#include "endpointer/eval.hpp"
#include "endpointer/labels.hpp"

namespace ep {
namespace {

constexpr double kRate = 25.0;

TurnOutcome outcome(double latency) {
  TurnOutcome o;
  o.latency_ms = latency;
  o.trigger_frame = 0;
  o.kind = latency < 0 ? TurnClass::Cutoff : TurnClass::Valid;
  return o;
}

ProbMatrix flat(std::size_t n, double p = 0.0) {
  ProbMatrix m = ProbMatrix::Zero(static_cast<Eigen::Index>(n), kNumClasses);
  m.col(1).setConstant(p);
  m.col(0).setConstant(1.0 - p);
  return m;
}

// Four user turns of 1 s separated by 2 s system turns, 40 ms frames.
DialogueScript four_turns() {
  DialogueScript d{"w", {}, 0};
  std::int64_t t = 0;
  for (int k = 0; k < 4; ++k) {
    d.turns.push_back({Speaker::User, t, t + 1000, {}});
    d.turns.push_back({Speaker::System, t + 1400, t + 2400, {}});
    t += 3000;
  }
  d.total_duration_ms = t;
  return d;
}

TEST(Aggregate, WorkedExample) {
  const std::vector<TurnOutcome> o = {outcome(120), outcome(-80), outcome(160), outcome(200)};
  const auto row = aggregate(o, 0.9);
  EXPECT_DOUBLE_EQ(row.ep_cutoff_pct, 25.0);
  EXPECT_DOUBLE_EQ(*row.ep50_ms, 160.0);
  EXPECT_DOUBLE_EQ(*row.ep90_ms, 200.0);
  EXPECT_DOUBLE_EQ(row.miss_rate_pct, 0.0);
  EXPECT_EQ(row.n_turns, 4u);
}

TEST(Aggregate, WorkedExampleThroughEvaluateTurns) {
  const auto d = four_turns();
  auto probs = flat(frames_for_script(d, kRate));
  // true ends at frames 25, 100, 175, 250
  for (std::int64_t f : {25 + 3, 100 - 2, 175 + 4, 250 + 5}) probs(f, 1) = 0.95;
  const auto o = evaluate_turns(probs, d, kRate, 0.9);
  ASSERT_EQ(o.size(), 4u);
  EXPECT_EQ(o[0].kind, TurnClass::Valid);
  EXPECT_DOUBLE_EQ(o[0].latency_ms, 120.0);
  EXPECT_EQ(o[1].kind, TurnClass::Cutoff);
  EXPECT_DOUBLE_EQ(o[1].latency_ms, -80.0);
  const auto row = aggregate(o, 0.9);
  EXPECT_DOUBLE_EQ(row.ep_cutoff_pct, 25.0);
  EXPECT_DOUBLE_EQ(*row.ep50_ms, 160.0);
  EXPECT_DOUBLE_EQ(*row.ep90_ms, 200.0);
}

TEST(Aggregate, AllCutoffLeavesLatencyUndefined) {
  const std::vector<TurnOutcome> o = {outcome(-40), outcome(-400)};
  const auto row = aggregate(o, 0.5);
  EXPECT_DOUBLE_EQ(row.ep_cutoff_pct, 100.0);
  EXPECT_FALSE(row.ep50_ms);
  EXPECT_FALSE(row.ep90_ms);
  EXPECT_NE(metrics_csv({row}).find("0.50,NA,NA,100,0,2"), std::string::npos);
}

TEST(Aggregate, EmptyRejected) {
  EXPECT_THROW(aggregate(std::vector<TurnOutcome>{}, 0.5), ConfigError);
}

TEST(EvaluateTurns, MissAndLengthMismatch) {
  const auto d = four_turns();
  const auto probs = flat(frames_for_script(d, kRate));
  for (const auto& o : evaluate_turns(probs, d, kRate, 0.5)) EXPECT_EQ(o.kind, TurnClass::Miss);
  EXPECT_THROW(evaluate_turns(flat(10), d, kRate, 0.5), ConfigError);
}

TEST(EvaluateTurns, TriggerOutsideWindowIgnored) {
  const auto d = four_turns();
  auto probs = flat(frames_for_script(d, kRate));
  probs(30, 1) = 0.99;  // in the gap before the system turn
  const auto o = evaluate_turns(probs, d, kRate, 0.9);
  EXPECT_EQ(o[0].kind, TurnClass::Valid);  // window runs up to the system turn start
  probs(30, 1) = 0.0;
  probs(40, 1) = 0.99;  // inside the system turn: no longer armed for turn 0
  EXPECT_EQ(evaluate_turns(probs, d, kRate, 0.9)[0].kind, TurnClass::Miss);
}

// Brute-force reference: scan each user turn's window frame by frame, then
// sort the valid latencies and pick ranks by hand.
struct Oracle {
  double cutoff = 0, miss = 0;
  std::optional<double> ep50, ep90;
};

Oracle brute_force(const std::vector<ProbMatrix>& probs, const std::vector<DialogueScript>& scripts,
                   double th) {
  std::vector<double> lat;
  double n = 0, cut = 0, miss = 0;
  const double period = 1000.0 / kRate;
  for (std::size_t k = 0; k < scripts.size(); ++k) {
    const auto& d = scripts[k];
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      if (d.turns[i].speaker != Speaker::User) continue;
      ++n;
      const double limit = i + 1 < d.turns.size() ? static_cast<double>(d.turns[i + 1].start_ms)
                                                   : static_cast<double>(probs[k].rows()) * period;
      bool hit = false;
      for (Eigen::Index f = 0; f < probs[k].rows(); ++f) {
        const double t = static_cast<double>(f) * period;
        if (t < static_cast<double>(d.turns[i].start_ms) || t >= limit) continue;
        if (probs[k](f, 1) < th) continue;
        // true end rounded up to a frame boundary
        const double end = std::ceil(static_cast<double>(d.turns[i].end_ms) / period - 1e-9) * period;
        const double l = t - end;
        if (l < 0) ++cut; else lat.push_back(l);
        hit = true;
        break;
      }
      if (!hit) ++miss;
    }
  }
  Oracle o;
  o.cutoff = 100.0 * cut / n;
  o.miss = 100.0 * miss / n;
  std::sort(lat.begin(), lat.end());
  if (!lat.empty()) {
    const auto m = lat.size();
    std::size_t r50 = (m + 1) / 2;          // ceil(0.5 m)
    std::size_t r90 = (9 * m + 9) / 10;     // ceil(0.9 m)
    o.ep50 = lat[r50 - 1];
    o.ep90 = lat[r90 - 1];
  }
  return o;
}

DialogueScript random_script(Rng& rng, int id) {
  std::uniform_int_distribution<int> n_turns(1, 5), dur(2, 30), gap(0, 10), who(0, 1);
  DialogueScript d{"r" + std::to_string(id), {}, 0};
  std::int64_t t = 40 * gap(rng) + 7 * who(rng);
  const int n = n_turns(rng);
  int speaker = who(rng);
  for (int k = 0; k < n; ++k) {
    const std::int64_t len = 40 * dur(rng) + (who(rng) ? 13 : 0);
    d.turns.push_back({speaker ? Speaker::System : Speaker::User, t, t + len, {}});
    t += len + 40 * gap(rng);
    speaker = 1 - speaker;
  }
  d.total_duration_ms = t + 40 * gap(rng);
  return d;
}

TEST(EvaluateTurns, MatchesBruteForceOnRandomTraces) {
  Rng rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    std::vector<DialogueScript> scripts;
    std::vector<ProbMatrix> probs;
    for (int k = 0; k < 5; ++k) {
      scripts.push_back(random_script(rng, k));
      auto p = flat(frames_for_script(scripts.back(), kRate));
      for (Eigen::Index f = 0; f < p.rows(); ++f) p(f, 1) = u(rng);
      probs.push_back(p);
    }
    for (double th : {0.7, 0.9, 0.97}) {
      std::vector<TurnOutcome> all;
      for (std::size_t k = 0; k < scripts.size(); ++k) {
        auto o = evaluate_turns(probs[k], scripts[k], kRate, th);
        all.insert(all.end(), o.begin(), o.end());
      }
      if (all.empty()) continue;
      const auto row = aggregate(all, th);
      const auto ref = brute_force(probs, scripts, th);
      ASSERT_DOUBLE_EQ(row.ep_cutoff_pct, ref.cutoff);
      ASSERT_DOUBLE_EQ(row.miss_rate_pct, ref.miss);
      ASSERT_EQ(row.ep50_ms.has_value(), ref.ep50.has_value());
      if (ref.ep50) {
        ASSERT_DOUBLE_EQ(*row.ep50_ms, *ref.ep50);
        ASSERT_DOUBLE_EQ(*row.ep90_ms, *ref.ep90);
        ASSERT_LE(*row.ep50_ms, *row.ep90_ms);
        ASSERT_DOUBLE_EQ(std::fmod(*row.ep50_ms, 40.0), 0.0);
      }
      ++checked;
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(NearestRank, Definition) {
  EXPECT_EQ(*nearest_rank({120, 160, 200}, 0.9), 200);
  EXPECT_EQ(*nearest_rank({120, 160, 200}, 0.5), 160);
  EXPECT_EQ(*nearest_rank({1, 2, 3, 4}, 0.5), 2);
  EXPECT_EQ(*nearest_rank({5}, 0.9), 5);
  EXPECT_FALSE(nearest_rank({}, 0.5));
}

TEST(Sweep, GridParsingAndSingleRow) {
  const auto g = parse_grid("0.70:0.99:0.01");
  ASSERT_EQ(g.size(), 30u);
  EXPECT_DOUBLE_EQ(g.front(), 0.70);
  EXPECT_DOUBLE_EQ(g.back(), 0.99);
  EXPECT_THROW(parse_grid("0.7-0.9"), ConfigError);
  EXPECT_THROW(parse_grid("0.9:0.7:0.01"), ConfigError);
  EXPECT_THROW(threshold_grid(0.0, 0.5, 0.1), ConfigError);

  const auto d = four_turns();
  auto p = flat(frames_for_script(d, kRate), 0.1);
  p(30, 1) = 0.8;
  const auto rows = sweep({p}, {d}, kRate, {0.75});
  ASSERT_EQ(rows.size(), 1u);
  const auto o = evaluate_turns(p, d, kRate, 0.75);
  const auto ref = aggregate(o, 0.75);
  EXPECT_EQ(rows[0].ep50_ms, ref.ep50_ms);
  EXPECT_EQ(rows[0].ep_cutoff_pct, ref.ep_cutoff_pct);
  EXPECT_THROW(sweep({p}, {d}, kRate, {}), ConfigError);
}

TEST(Sweep, TriggersMonotoneInThreshold) {
  Rng rng(7);
  std::uniform_real_distribution<double> u(0.6, 1.0);
  std::vector<DialogueScript> scripts;
  std::vector<ProbMatrix> probs;
  for (int k = 0; k < 20; ++k) {
    scripts.push_back(random_script(rng, k));
    auto p = flat(frames_for_script(scripts.back(), kRate));
    for (Eigen::Index f = 0; f < p.rows(); ++f) p(f, 1) = u(rng);
    probs.push_back(p);
  }
  std::vector<std::vector<TurnOutcome>> per;
  const auto rows = sweep(probs, scripts, kRate, parse_grid("0.70:0.99:0.01"), &per);
  for (std::size_t i = 1; i < per.size(); ++i) {
    EXPECT_GT(rows[i].threshold, rows[i - 1].threshold);
    EXPECT_GE(rows[i].miss_rate_pct, rows[i - 1].miss_rate_pct);
    for (std::size_t j = 0; j < per[i].size(); ++j) {
      const auto& a = per[i - 1][j];
      const auto& b = per[i][j];
      if (!b.trigger_frame) continue;
      ASSERT_TRUE(a.trigger_frame);
      EXPECT_GE(*b.trigger_frame, *a.trigger_frame);
    }
  }
}

TEST(OperatingPoint, ExactMatchPrefersLargestThreshold) {
  std::vector<MetricsRow> rows(4);
  rows[0] = {0.80, 120.0, 200.0, 10.0, 0, 10};
  rows[1] = {0.85, 160.0, 240.0, 8.0, 0, 10};
  rows[2] = {0.90, 160.0, 280.0, 8.0, 0, 10};
  rows[3] = {0.95, 200.0, 320.0, 5.0, 0, 10};
  EXPECT_DOUBLE_EQ(operating_point(rows, 160)->threshold, 0.90);
  EXPECT_DOUBLE_EQ(operating_point(rows, 120)->threshold, 0.80);
  EXPECT_FALSE(operating_point(rows, 140));
  EXPECT_DOUBLE_EQ(operating_point(rows, 140, 40)->threshold, 0.90);  // tie on gap: lower cutoff
}

TEST(Csv, HeaderAndFormatting) {
  MetricsRow r{0.7, 160.0, 240.0, 12.5, 2.0, 8};
  EXPECT_EQ(metrics_csv({r}),
            "threshold,ep50_ms,ep90_ms,ep_cutoff_pct,miss_rate_pct,n_turns\n0.70,160,240,12.5,2,8\n");
  EXPECT_EQ(curve_csv({r}),
            "series,latency_ms,ep_cutoff_pct,threshold\nep50,160,12.5,0.70\nep90,240,12.5,0.70\n");
}

TEST(CutoffBins, PauseDurationBinning) {
  DialogueScript d{"b", {{Speaker::User, 0, 2000, {{100, 400}, {1000, 1050}}}}, 2400};
  TurnOutcome in_pause;
  in_pause.dialogue_id = "b";
  in_pause.kind = TurnClass::Cutoff;
  in_pause.trigger_ms = 150;
  TurnOutcome short_pause = in_pause;
  short_pause.trigger_ms = 1040;
  TurnOutcome in_speech = in_pause;
  in_speech.trigger_ms = 600;
  TurnOutcome valid = in_pause;
  valid.kind = TurnClass::Valid;
  const std::vector<TurnOutcome> o = {in_pause, short_pause, in_speech, valid};
  const auto bins = cutoff_error_bins(o, {d});
  ASSERT_EQ(bins.size(), 12u);
  std::int64_t total = 0;
  for (const auto& b : bins) total += b.count;
  EXPECT_EQ(total, 3);
  EXPECT_EQ(bins[3].count, 1);  // [300, 400)
  EXPECT_EQ(bins[0].count, 1);  // [0, 100)
  EXPECT_TRUE(bins.back().in_speech);
  EXPECT_EQ(bins.back().count, 1);
  EXPECT_TRUE(std::isinf(bins[10].hi_ms));

  for (const auto& b : cutoff_error_bins(std::vector<TurnOutcome>{valid}, {d})) EXPECT_EQ(b.count, 0);
  const auto csv = cutoff_bins_csv(bins);
  EXPECT_EQ(csv.rfind("bin,lo_ms,hi_ms,count\n", 0), 0u);
  EXPECT_NE(csv.find("pause,300,400,1\n"), std::string::npos);
  EXPECT_NE(csv.find("pause,1000,inf,0\n"), std::string::npos);
  EXPECT_NE(csv.find("in_speech,NA,NA,1\n"), std::string::npos);
}

TEST(EnergyVad, EdgeCases) {
  const std::vector<double> silent(50, 0.1);
  const auto all = energy_vad(silent, kRate);
  ASSERT_EQ(all.size(), 1u);
  EXPECT_DOUBLE_EQ(all[0].start_ms, 0.0);
  EXPECT_DOUBLE_EQ(all[0].end_ms, 2000.0);

  EXPECT_TRUE(energy_vad(std::vector<double>(50, 2.0), kRate).empty());

  std::vector<double> mixed(20, 1.0);
  mixed[3] = 0.0;                                  // 40 ms: below the minimum duration
  for (int i = 10; i < 13; ++i) mixed[i] = 0.0;    // 120 ms
  const auto segs = energy_vad(mixed, kRate);
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_DOUBLE_EQ(segs[0].start_ms, 400.0);
  EXPECT_DOUBLE_EQ(segs[0].end_ms, 520.0);
}

TEST(EnergyVad, IouAndScriptSilences) {
  DialogueScript d{"s", {{Speaker::User, 200, 1000, {{400, 600}}}, {Speaker::System, 1200, 1600, {}}}, 2000};
  const auto sil = script_silences(d, kRate, 50);
  ASSERT_EQ(sil.size(), 4u);
  EXPECT_DOUBLE_EQ(sil[0].end_ms, 200.0);
  EXPECT_DOUBLE_EQ(sil[1].start_ms, 400.0);
  EXPECT_DOUBLE_EQ(segments_iou(sil, sil, kRate, 50), 1.0);
  EXPECT_DOUBLE_EQ(segments_iou({{0, 400}}, {{200, 600}}, kRate, 50), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(segments_iou({}, {}, kRate, 50), 1.0);
}

}  // namespace
}  // namespace ep
