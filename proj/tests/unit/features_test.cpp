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

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "endpointer/common.hpp"
#include "endpointer/features.hpp"

namespace ep {
namespace {

DialogueScript two_turns() {
  return {"feat",
          {{Speaker::User, 400, 3000, {{1200, 1800}}},
           {Speaker::System, 3800, 6000, {}}},
          7000};
}

TEST(Render, SilenceFramesStayNearSilenceMean) {
  SynthFeatureConfig cfg;
  const auto d = two_turns();
  const auto fs = render_features(d, cfg, StreamMode::TwoStream);
  const auto& user = fs.streams[0];
  // user stream is silent before 400 ms and after 3000 ms
  for (Eigen::Index i = 0; i < 10; ++i) {
    const double msd = (user.row(i).array() - cfg.silence_level).square().mean();
    EXPECT_LT(msd, 9.0 * cfg.silence_sigma * cfg.silence_sigma);
  }
}

TEST(Render, MonoIsAverageOfTwoStreams) {
  SynthFeatureConfig cfg;
  const auto d = two_turns();
  const auto two = render_features(d, cfg, StreamMode::TwoStream);
  const auto mono = render_features(d, cfg, StreamMode::Mono);
  ASSERT_EQ(mono.n_streams(), 1u);
  FeatureMatrix avg(two.streams[0].rows(), two.streams[0].cols());
  for (Eigen::Index i = 0; i < avg.rows(); ++i) {
    for (Eigen::Index j = 0; j < avg.cols(); ++j) {
      avg(i, j) = (two.streams[0](i, j) + two.streams[1](i, j)) * 0.5f;
    }
  }
  EXPECT_EQ(mono.streams[0], avg);
}

TEST(Render, PauseFramesLookLikeGapFrames) {
  SynthFeatureConfig cfg;
  DialogueScript d{"p", {}, 0};
  std::int64_t t = 0;
  for (int k = 0; k < 40; ++k) {
    Turn u{Speaker::User, t + 500, t + 3500, {{t + 1500, t + 2500}}};
    d.turns.push_back(u);
    d.turns.push_back({Speaker::System, t + 4500, t + 5000, {}});
    t += 5000;
  }
  d.total_duration_ms = t + 500;
  const auto fs = render_features(d, cfg, StreamMode::TwoStream);
  const auto& u = fs.streams[0];
  double pause_sum = 0, pause_sq = 0, gap_sum = 0, gap_sq = 0;
  double n_pause = 0, n_gap = 0;
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    const double ms = static_cast<double>(i) * 40.0;
    const double in_cycle = std::fmod(ms, 5000.0);
    const bool pause = in_cycle >= 1500 && in_cycle < 2500;
    const bool gap = in_cycle >= 3500 && in_cycle < 4500;
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
      const double v = u(i, j);
      if (pause) {
        pause_sum += v;
        pause_sq += v * v;
        ++n_pause;
      } else if (gap) {
        gap_sum += v;
        gap_sq += v * v;
        ++n_gap;
      }
    }
  }
  const double pm = pause_sum / n_pause, gm = gap_sum / n_gap;
  const double ps = std::sqrt(pause_sq / n_pause - pm * pm);
  const double gs = std::sqrt(gap_sq / n_gap - gm * gm);
  EXPECT_NEAR(pm, gm, 0.05);
  EXPECT_NEAR(ps, cfg.silence_sigma, 0.05);
  EXPECT_NEAR(gs, cfg.silence_sigma, 0.05);
}

TEST(Render, DeterministicPerSeed) {
  SynthFeatureConfig cfg;
  const auto d = two_turns();
  EXPECT_EQ(render_features(d, cfg, StreamMode::Mono).streams[0],
            render_features(d, cfg, StreamMode::Mono).streams[0]);
}

TEST(LogMel, FrameCountFormula) {
  std::vector<float> one_second(8000, 0.1f);
  EXPECT_EQ(logmel(one_second).num_frames(), 24u);
  EXPECT_FLOAT_EQ(logmel(one_second).frame_rate_hz, 25.0f);
}

TEST(LogMel, ShortAudioIsEmpty) {
  std::vector<float> short_audio(639, 0.1f);
  const auto fs = logmel(short_audio);
  EXPECT_EQ(fs.num_frames(), 0u);
}

TEST(LogMel, ZeroWaveformIsLogEpsilon) {
  std::vector<float> zeros(4000, 0.0f);
  const auto fs = logmel(zeros);
  ASSERT_GT(fs.num_frames(), 0u);
  const float expect = static_cast<float>(std::log(1e-10));
  EXPECT_TRUE((fs.streams[0].array() == expect).all());
}

TEST(LogMel, ToneEnergyPeaksInItsBand) {
  std::vector<float> tone(16000);
  for (std::size_t n = 0; n < tone.size(); ++n) {
    tone[n] = static_cast<float>(std::sin(2.0 * std::numbers::pi * 1000.0 * n / 8000.0));
  }
  const auto fs = logmel(tone);
  Eigen::Index best = 0;
  fs.streams[0].colwise().mean().maxCoeff(&best);

  // Band centres straight from the mel scale: 42 points evenly spaced in mel
  // between 0 and 4 kHz, centres are points 1..40.
  const double top = 2595.0 * std::log10(1.0 + 4000.0 / 700.0);
  int nearest = 0;
  double nearest_gap = 1e9;
  for (int m = 0; m < 40; ++m) {
    const double mel = top * (m + 1) / 41.0;
    const double hz = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
    if (std::abs(hz - 1000.0) < nearest_gap) {
      nearest_gap = std::abs(hz - 1000.0);
      nearest = m;
    }
  }
  EXPECT_EQ(best, nearest);
}

FeatureSequence column(std::vector<float> v) {
  FeatureSequence fs;
  fs.frame_rate_hz = 75.0f;
  fs.streams.emplace_back(Eigen::Map<FeatureMatrix>(v.data(), static_cast<Eigen::Index>(v.size()), 1));
  return fs;
}

TEST(Downsample, BlockMeans) {
  const auto out = causal_downsample(column({1, 2, 3, 4, 5, 6}), 3);
  ASSERT_EQ(out.num_frames(), 2u);
  EXPECT_EQ(out.streams[0](0, 0), 2.0f);
  EXPECT_EQ(out.streams[0](1, 0), 5.0f);
  EXPECT_FLOAT_EQ(out.frame_rate_hz, 25.0f);
}

TEST(Downsample, FactorOneIsIdentity) {
  const auto in = column({3, 1, 4, 1, 5});
  EXPECT_EQ(causal_downsample(in, 1).streams[0], in.streams[0]);
}

TEST(Downsample, TrailingPartialBlockIsAveraged) {
  const auto out = causal_downsample(column({1, 2, 3, 4, 5, 6, 7, 9}), 3);
  ASSERT_EQ(out.num_frames(), 3u);
  EXPECT_EQ(out.streams[0](2, 0), 8.0f);
}

TEST(Downsample, CodecRateFactors) {
  EXPECT_EQ(downsample_factor(75.0, 25.0), 3);
  EXPECT_EQ(downsample_factor(80.0, 20.0), 4);
  EXPECT_THROW(downsample_factor(75.0, 20.0), ConfigError);
}

TEST(Downsample, NonPositiveFactorRejected) {
  EXPECT_THROW(causal_downsample(column({1, 2}), 0), ConfigError);
  EXPECT_THROW(causal_downsample(column({1, 2}), -2), ConfigError);
}

TEST(Downsample, PrefixEquivalence) {
  std::vector<float> v;
  for (int i = 0; i < 30; ++i) v.push_back(std::sin(0.37f * static_cast<float>(i)));
  const auto full = causal_downsample(column(v), 4);
  for (std::size_t n = 4; n <= v.size(); n += 4) {
    std::vector<float> prefix(v.begin(), v.begin() + static_cast<long>(n));
    const auto part = causal_downsample(column(prefix), 4);
    EXPECT_EQ(part.streams[0], full.streams[0].topRows(part.streams[0].rows()));
  }
}

}  // namespace
}  // namespace ep
