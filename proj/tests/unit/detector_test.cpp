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
#include <memory>
#include <random>

#include <gtest/gtest.h>

#include "endpointer/checkpoint.hpp"
#include "endpointer/common.hpp"
#include "endpointer/corpus.hpp"
#include "endpointer/detector.hpp"
#include "endpointer/eval.hpp"
#include "endpointer/training.hpp"

namespace ep {
namespace {

std::shared_ptr<ModelCheckpoint> random_model(Arch arch, int dim, std::uint64_t seed) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.input_dim = dim;
  cfg.proj_dim = 8;
  cfg.hidden_dim = 8;
  cfg.rng_seed = seed;
  auto m = std::make_shared<ModelCheckpoint>(init_model(cfg));
  Rng rng(seed);
  std::normal_distribution<float> n(0.0f, 0.8f);
  m->params.visit([&](const std::string&, Mat<float>& w) {
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] += n(rng);
  });
  return m;
}

std::vector<LabeledDialogue> small_dataset(StreamMode mode, std::size_t n, std::uint64_t seed) {
  CorpusConfig cc;
  cc.n_dialogues = static_cast<std::int64_t>(n);
  cc.turns_per_dialogue = {2, 4};
  cc.turn_duration_ms = {800, 2500};
  cc.rng_seed = seed;
  const auto corpus = generate_corpus(cc);
  SynthFeatureConfig fc;
  fc.rng_seed = seed;
  return build_dataset(corpus.all(), fc, mode);
}

std::vector<float> user_end_trace(const ModelCheckpoint& m, const LabeledDialogue& d) {
  const auto p = forward(m.params, m.config, d.features, &d.activity);
  std::vector<float> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index t = 0; t < p.rows(); ++t) out[static_cast<std::size_t>(t)] = p(t, 1);
  return out;
}

TEST(FirstAtOrAbove, TraceExample) {
  const std::vector<float> trace = {0.1f, 0.2f, 0.96f, 0.97f};
  EXPECT_EQ(first_at_or_above(trace, 0.95), 2);
  EXPECT_FALSE(first_at_or_above(trace, 0.99));
  EXPECT_EQ(first_at_or_above(trace, 0.2), 1);  // at-or-above, not strictly above
}

TEST(DetectorSession, ThresholdRange) {
  auto m = random_model(Arch::SingleStream, 4, 1);
  EXPECT_NO_THROW(DetectorSession(m, 0.95, 25.0));
  EXPECT_THROW(DetectorSession(m, 1.5, 25.0), ConfigError);
  EXPECT_THROW(DetectorSession(m, 0.0, 25.0), ConfigError);
  EXPECT_THROW(DetectorSession(m, 1.0, 25.0), ConfigError);
  EXPECT_THROW(DetectorSession(m, 0.5, 0.0), ConfigError);
  EXPECT_THROW(DetectorSession(nullptr, 0.5, 25.0), ConfigError);
  DetectorSession s(m, 0.5, 25.0);
  EXPECT_TRUE(s.armed(Speaker::User));
  EXPECT_FALSE(s.armed(Speaker::System));
  EXPECT_EQ(s.frame_index(), 0);
}

TEST(DetectorSession, InputChecks) {
  auto m = random_model(Arch::SingleStream, 4, 2);
  DetectorSession s(m, 0.5, 25.0);
  const std::vector<float> ok(4, 0.0f), bad(3, 0.0f);
  EXPECT_THROW(s.step(ok, std::nullopt), ConfigError);
  EXPECT_THROW(s.step(bad, Activity::NonSystem), ConfigError);
  EXPECT_NO_THROW(s.step(ok, Activity::NonSystem));
  s.close();
  EXPECT_THROW(s.step(ok, Activity::NonSystem), std::logic_error);

  auto two = random_model(Arch::TwoStream, 4, 3);
  DetectorSession t(two, 0.5, 25.0);
  EXPECT_THROW(t.step(ok, std::nullopt), ConfigError);  // one stream for a two-stream model
  const std::span<const float> both[2] = {ok, ok};
  EXPECT_NO_THROW(t.step(std::span<const std::span<const float>>(both, 2), std::nullopt));
}

// Runs a session over a whole dialogue without any rearming.
std::vector<SessionStep> run(DetectorSession& s, const LabeledDialogue& d, bool rearm_each = false) {
  std::vector<SessionStep> out;
  std::vector<std::span<const float>> frames(d.features.n_streams());
  for (std::size_t t = 0; t < d.num_frames(); ++t) {
    if (rearm_each) s.rearm(Speaker::User);
    for (std::size_t k = 0; k < frames.size(); ++k) {
      frames[k] = {d.features.streams[k].row(static_cast<Eigen::Index>(t)).data(), d.features.dim()};
    }
    out.push_back(s.step(frames, Activity::NonSystem));
  }
  return out;
}

LabeledDialogue without_system_activity(LabeledDialogue d) {
  std::fill(d.activity.flags.begin(), d.activity.flags.end(), Activity::NonSystem);
  return d;
}

TEST(DetectorSession, FirstCrossingThenDisarm) {
  const auto ds = small_dataset(StreamMode::Mono, 1, 4);
  auto m = random_model(Arch::SingleStream, static_cast<int>(ds[0].features.dim()), 5);
  const auto d = without_system_activity(ds[0]);
  const auto trace = user_end_trace(*m, d);
  auto sorted = trace;
  std::sort(sorted.begin(), sorted.end());
  const double th = sorted[sorted.size() * 3 / 4];
  const auto expect = first_at_or_above(trace, th);
  ASSERT_TRUE(expect);

  DetectorSession s(m, th, d.features.frame_rate_hz);
  const auto steps = run(s, d);
  int events = 0;
  for (const auto& st : steps) {
    for (const auto& e : st.events) {
      ++events;
      EXPECT_EQ(e.frame_index, *expect);
      EXPECT_DOUBLE_EQ(e.time_ms, static_cast<double>(*expect) * 40.0);
      EXPECT_EQ(e.kind, EndpointKind::UserEnd);
    }
  }
  EXPECT_EQ(events, 1);
  EXPECT_FALSE(s.armed(Speaker::User));

  // Above the maximum: nothing fires.
  DetectorSession quiet(m, std::min(0.999999, static_cast<double>(sorted.back()) + 1e-4),
                        d.features.frame_rate_hz);
  for (const auto& st : run(quiet, d)) EXPECT_TRUE(st.events.empty());
}

TEST(DetectorSession, RearmAllowsSecondEvent) {
  const auto ds = small_dataset(StreamMode::Mono, 1, 6);
  auto m = random_model(Arch::SingleStream, static_cast<int>(ds[0].features.dim()), 7);
  const auto d = without_system_activity(ds[0]);
  const auto trace = user_end_trace(*m, d);
  auto sorted = trace;
  std::sort(sorted.begin(), sorted.end());
  const double th = sorted[sorted.size() / 2];

  // Rearming (twice, idempotently) before every frame fires exactly on every crossing frame.
  DetectorSession s(m, th, d.features.frame_rate_hz);
  s.rearm(Speaker::User);
  s.rearm(Speaker::User);
  EXPECT_TRUE(s.armed(Speaker::User));
  const auto steps = run(s, d, true);
  for (std::size_t t = 0; t < trace.size(); ++t) {
    EXPECT_EQ(steps[t].events.size(), trace[t] >= th ? 1u : 0u) << t;
  }

  DetectorSession once(m, th, d.features.frame_rate_hz);
  once.disarm(Speaker::User);
  for (const auto& st : run(once, d)) EXPECT_TRUE(st.events.empty());
}

TEST(DetectorSession, SystemActivityRearmsUser) {
  auto m = random_model(Arch::SingleStream, 4, 8);
  DetectorSession s(m, 1e-6, 25.0);  // every frame crosses
  const std::vector<float> f(4, 0.3f);
  EXPECT_EQ(s.step(f, Activity::NonSystem).events.size(), 1u);
  EXPECT_EQ(s.step(f, Activity::NonSystem).events.size(), 0u);
  EXPECT_EQ(s.step(f, Activity::SystemActive).events.size(), 1u);
}

TEST(DetectorSession, SystemEndDetectionIsOptIn) {
  auto m = random_model(Arch::TwoStream, 4, 9);
  const std::vector<float> f(4, 0.1f);
  const std::span<const float> both[2] = {f, f};
  const std::span<const std::span<const float>> frame(both, 2);
  DetectorSession off(m, 1e-6, 25.0);
  off.rearm(Speaker::System);
  EXPECT_EQ(off.step(frame, std::nullopt).events.size(), 1u);  // user only
  DetectorSession on(m, 1e-6, 25.0, true);
  on.rearm(Speaker::System);
  const auto st = on.step(frame, std::nullopt);
  ASSERT_EQ(st.events.size(), 2u);
  EXPECT_EQ(st.events[1].kind, EndpointKind::SystemEnd);
  EXPECT_EQ(on.step(frame, std::nullopt).events.size(), 0u);
}

// Batched oracle: all dialogues advance together as columns of one batch.
std::vector<ProbMatrix> batched_forward(const ModelCheckpoint& m, const std::vector<LabeledDialogue>& ds) {
  const auto& cfg = m.config;
  const auto B = static_cast<Eigen::Index>(ds.size());
  std::size_t T = 0;
  for (const auto& d : ds) T = std::max(T, d.num_frames());
  auto state = zero_state<float>(cfg, B);
  std::vector<ProbMatrix> out;
  for (const auto& d : ds) out.emplace_back(static_cast<Eigen::Index>(d.num_frames()), 4);
  std::vector<Mat<float>> frames(static_cast<std::size_t>(cfg.n_streams()), Mat<float>::Zero(cfg.input_dim, B));
  std::vector<int> flags(ds.size());
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t b = 0; b < ds.size(); ++b) {
      const bool live = t < ds[b].num_frames();
      for (std::size_t s = 0; s < frames.size(); ++s) {
        if (live) {
          frames[s].col(static_cast<Eigen::Index>(b)) =
              ds[b].features.streams[s].row(static_cast<Eigen::Index>(t)).transpose();
        } else {
          frames[s].col(static_cast<Eigen::Index>(b)).setZero();
        }
      }
      flags[b] = live ? static_cast<int>(ds[b].activity.flags[t]) : 1;
    }
    const auto p = step<float>(m.params, cfg, frames, flags, state);
    for (std::size_t b = 0; b < ds.size(); ++b) {
      if (t < ds[b].num_frames()) out[b].row(static_cast<Eigen::Index>(t)) = p.col(static_cast<Eigen::Index>(b)).transpose();
    }
  }
  return out;
}

void check_streaming_matches_batch(Arch arch, StreamMode mode) {
  const auto ds = small_dataset(mode, 12, 10);
  auto m = random_model(arch, static_cast<int>(ds[0].features.dim()), 11);
  const auto batch = batched_forward(*m, ds);
  for (std::size_t k = 0; k < ds.size(); ++k) {
    std::vector<std::array<float, 4>> probs;
    stream_dialogue(m, ds[k], 0.9, &probs);
    ASSERT_EQ(probs.size(), ds[k].num_frames());
    const auto offline = forward(m->params, m->config, ds[k].features, &ds[k].activity);
    for (std::size_t t = 0; t < probs.size(); ++t) {
      for (int c = 0; c < 4; ++c) {
        ASSERT_NEAR(probs[t][static_cast<std::size_t>(c)], batch[k](static_cast<Eigen::Index>(t), c), 1e-6);
        ASSERT_EQ(probs[t][static_cast<std::size_t>(c)], offline(static_cast<Eigen::Index>(t), c));
      }
    }
  }
}

TEST(Streaming, SingleStreamMatchesBatch) { check_streaming_matches_batch(Arch::SingleStream, StreamMode::Mono); }
TEST(Streaming, TwoStreamMatchesBatch) { check_streaming_matches_batch(Arch::TwoStream, StreamMode::TwoStream); }

TEST(Streaming, EventsMatchOfflineScan) {
  const auto ds = small_dataset(StreamMode::Mono, 20, 12);
  auto m = random_model(Arch::SingleStream, static_cast<int>(ds[0].features.dim()), 13);
  for (double th : {0.3, 0.5, 0.7}) {
    for (const auto& d : ds) {
      const auto triggers = stream_dialogue(m, d, th);
      const auto offline = evaluate_turns(forward(m->params, m->config, d.features, &d.activity), d.script,
                                          d.features.frame_rate_hz, th);
      ASSERT_EQ(triggers.size(), offline.size());
      std::size_t user_turns = 0;
      for (const auto& t : d.script.turns) user_turns += t.speaker == Speaker::User;
      EXPECT_LE(static_cast<std::size_t>(std::count_if(triggers.begin(), triggers.end(),
                                                       [](const auto& t) { return t.has_value(); })),
                user_turns);
      for (std::size_t i = 0; i < triggers.size(); ++i) EXPECT_EQ(triggers[i], offline[i].trigger_frame);
    }
  }
}

}  // namespace
}  // namespace ep
