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
#include <random>
#include <set>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "endpointer/checkpoint.hpp"
#include "endpointer/common.hpp"
#include "endpointer/corpus.hpp"
#include "endpointer/training.hpp"

namespace ep {
namespace {

std::vector<LabeledDialogue> small_dataset(std::size_t n, std::uint64_t seed, StreamMode mode = StreamMode::Mono) {
  CorpusConfig cc;
  cc.n_dialogues = static_cast<std::int64_t>(n);
  cc.turns_per_dialogue = {2, 4};
  cc.turn_duration_ms = {800, 2500};
  cc.rng_seed = seed;
  SynthFeatureConfig fc;
  fc.rng_seed = seed;
  return build_dataset(generate_corpus(cc).all(), fc, mode);
}

ProbMatrix one_hot(const std::vector<int>& classes) {
  ProbMatrix p = ProbMatrix::Zero(static_cast<Eigen::Index>(classes.size()), 4);
  for (std::size_t t = 0; t < classes.size(); ++t) p(static_cast<Eigen::Index>(t), classes[t]) = 1.0f;
  return p;
}

LabelSequence labels_of(const std::vector<int>& v) {
  LabelSequence s;
  for (int c : v) s.labels.push_back(static_cast<FrameLabel>(c));
  return s;
}

TEST(LabelDialogue, AlignsLabelsAndActivity) {
  const auto ds = small_dataset(3, 1);
  for (const auto& d : ds) {
    EXPECT_EQ(d.labels.size(), d.num_frames());
    EXPECT_EQ(d.activity.flags.size(), d.num_frames());
    for (std::size_t t = 0; t < d.num_frames(); ++t) {
      const bool sys = d.labels.labels[t] == FrameLabel::System;
      EXPECT_EQ(d.activity.flags[t] == Activity::SystemActive, sys);
    }
  }
}

TEST(SampleWindow, StartsAtATurnStart) {
  const auto ds = small_dataset(4, 2);
  Rng rng(3);
  for (const auto& d : ds) {
    std::set<std::size_t> starts;
    for (const auto& t : d.script.turns) {
      starts.insert(static_cast<std::size_t>(frame_at_or_after(static_cast<double>(t.start_ms), 25.0)));
    }
    std::set<std::size_t> seen;
    for (int k = 0; k < 200; ++k) {
      const auto w = sample_window(d, 7, 2.0, rng);
      EXPECT_EQ(w.dialogue, 7u);
      EXPECT_TRUE(starts.count(w.start_frame)) << w.start_frame;
      EXPECT_GE(w.length, 1u);
      EXPECT_LE(w.length, 50u);
      EXPECT_LE(w.start_frame + w.length, d.num_frames());
      seen.insert(w.start_frame);
    }
    EXPECT_EQ(seen, starts);  // every turn gets sampled
  }
}

TEST(MakeExample, DelayAppliedAfterSlicing) {
  const auto ds = small_dataset(1, 4);
  const auto& d = ds[0];
  const Window w{0, 10, 30};
  for (int tau : {0, 1, 3}) {
    const auto e = make_example(d, w, tau);
    ASSERT_EQ(e.length(), 30u);
    ASSERT_EQ(e.streams[0].rows(), 30);
    EXPECT_TRUE(e.streams[0].isApprox(d.features.streams[0].middleRows(10, 30)));
    for (int t = 0; t < 30; ++t) {
      const auto expect = t < tau ? FrameLabel::Pad : d.labels.labels[static_cast<std::size_t>(10 + t - tau)];
      EXPECT_EQ(e.targets[static_cast<std::size_t>(t)], expect);
      EXPECT_EQ(e.flags[static_cast<std::size_t>(t)], static_cast<int>(d.activity.flags[static_cast<std::size_t>(10 + t)]));
    }
  }
  EXPECT_THROW(make_example(d, Window{0, d.num_frames() - 5, 10}, 0), ConfigError);
}

TEST(ScorePredictions, PerfectIsOne) {
  const std::vector<int> truth = {0, 0, 1, 1, 2, 3, 0, 1};
  const auto r = score_predictions({one_hot(truth)}, {labels_of(truth)});
  EXPECT_DOUBLE_EQ(r.score, 1.0);
  for (int c = 0; c < 4; ++c) EXPECT_DOUBLE_EQ(r.recall[static_cast<std::size_t>(c)], 1.0);
}

TEST(ScorePredictions, ConstantUserIsHalf) {
  const std::vector<int> truth = {0, 0, 1, 1, 2, 3, 0, 1};
  const auto r = score_predictions({one_hot(std::vector<int>(truth.size(), 0))}, {labels_of(truth)});
  EXPECT_DOUBLE_EQ(r.recall[0], 1.0);
  EXPECT_DOUBLE_EQ(r.recall[1], 0.0);
  EXPECT_DOUBLE_EQ(r.score, 0.5);
}

TEST(ScorePredictions, PadFramesIgnoredAndMismatchRejected) {
  auto lab = labels_of({0, 1, 1});
  lab.labels[0] = FrameLabel::Pad;
  const auto r = score_predictions({one_hot({3, 1, 1})}, {lab});
  EXPECT_DOUBLE_EQ(r.score, 1.0);  // user absent: score is UserEnd recall alone
  EXPECT_FALSE(r.present[0]);
  EXPECT_THROW(score_predictions({one_hot({0, 1})}, {lab}), ConfigError);
  EXPECT_THROW(score_predictions({}, {lab}), ConfigError);
}

TEST(ScorePredictions, ConfusionMatchesRecount) {
  Rng rng(5);
  std::uniform_int_distribution<int> cls(0, 3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<ProbMatrix> probs;
  std::vector<LabelSequence> labels;
  std::int64_t counts[4][4] = {};
  for (int k = 0; k < 10; ++k) {
    const int n = 50 + k;
    ProbMatrix p(n, 4);
    std::vector<int> truth;
    for (int t = 0; t < n; ++t) {
      int best = 0;
      for (int c = 0; c < 4; ++c) {
        p(t, c) = u(rng);
        if (p(t, c) > p(t, best)) best = c;
      }
      truth.push_back(cls(rng));
      ++counts[truth.back()][best];
    }
    probs.push_back(p);
    labels.push_back(labels_of(truth));
  }
  const auto r = score_predictions(probs, labels);
  for (int a = 0; a < 4; ++a) {
    std::int64_t row = 0;
    for (int b = 0; b < 4; ++b) {
      EXPECT_EQ(r.confusion[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)], counts[a][b]);
      row += counts[a][b];
    }
    EXPECT_DOUBLE_EQ(r.recall[static_cast<std::size_t>(a)], static_cast<double>(counts[a][a]) / static_cast<double>(row));
  }
  EXPECT_DOUBLE_EQ(r.score, 0.5 * (r.recall[0] + r.recall[1]));
}

TEST(TrainConfig, ValidationAndJson) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.delay_tau = 2;
  c.batch_size = 3;
  c.lr = 5e-4;
  c.seed = 99;
  const auto back = train_config_from_json(train_config_to_json(c));
  EXPECT_EQ(back.delay_tau, 2);
  EXPECT_EQ(back.batch_size, 3);
  EXPECT_DOUBLE_EQ(back.lr, 5e-4);
  EXPECT_EQ(back.seed, 99u);
  using Mutator = void (*)(TrainConfig&);
  for (Mutator bad : std::initializer_list<Mutator>{[](TrainConfig& t) { t.epochs = 0; }, [](TrainConfig& t) { t.lr = -1; },
                   [](TrainConfig& t) { t.delay_tau = -1; }, [](TrainConfig& t) { t.batch_size = 0; },
                   [](TrainConfig& t) { t.window_s = 0; }}) {
    TrainConfig t;
    bad(t);
    EXPECT_THROW(t.validate(), ConfigError);
  }
}

TrainResult smoke_train(std::uint64_t seed, int epochs) {
  const auto tr = small_dataset(24, 6);
  const auto va = small_dataset(6, 7);
  ModelConfig mc;
  mc.input_dim = static_cast<int>(tr[0].features.dim());
  mc.proj_dim = 16;
  mc.hidden_dim = 16;
  mc.rng_seed = seed;
  TrainConfig tc;
  tc.epochs = epochs;
  tc.lr = 3e-3;
  tc.batch_size = 4;
  tc.delay_tau = 1;
  tc.seed = seed;
  return train(tr, va, init_model(mc), tc);
}

TEST(Train, LossDecreasesAndBestIsTracked) {
  const auto r = smoke_train(1, 6);
  ASSERT_EQ(r.log.size(), 6u);
  EXPECT_LT(r.log.back().train_loss, r.log.front().train_loss);
  double best = 0;
  int best_epoch = 0;
  for (const auto& l : r.log) {
    if (l.valid_score > best) {
      best = l.valid_score;
      best_epoch = l.epoch;
    }
  }
  EXPECT_DOUBLE_EQ(r.best.meta.validation_score, best);
  EXPECT_EQ(r.best.meta.epoch, best_epoch);
  EXPECT_EQ(r.best.meta.delay_tau, 1);
  EXPECT_DOUBLE_EQ(r.best.meta.frame_rate_hz, 25.0);
  EXPECT_EQ(r.last.meta.epoch, 6);
  ASSERT_TRUE(r.last.adam.has_value());
  const auto v = validate(r.best, small_dataset(6, 7), 1);
  EXPECT_DOUBLE_EQ(v.score, best);
}

TEST(Train, DeterministicPerSeed) {
  const auto a = smoke_train(3, 2);
  const auto b = smoke_train(3, 2);
  const auto c = smoke_train(4, 2);
  EXPECT_EQ(encode_checkpoint(a.last), encode_checkpoint(b.last));
  EXPECT_NE(encode_checkpoint(a.last), encode_checkpoint(c.last));
}

TEST(Train, RejectsMismatchedInputs) {
  auto tr = small_dataset(2, 8);
  ModelConfig mc;
  mc.input_dim = static_cast<int>(tr[0].features.dim()) + 1;
  TrainConfig tc;
  tc.epochs = 1;
  EXPECT_THROW(train(tr, tr, init_model(mc), tc), ConfigError);
  mc.input_dim -= 1;
  EXPECT_THROW(train({}, tr, init_model(mc), tc), ConfigError);
}

}  // namespace
}  // namespace ep
