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
#include <span>
#include <vector>

#include <Eigen/Core>

#include "endpointer/corpus.hpp"

namespace ep {

using FeatureMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// T x D frames per stream. One stream for mono input, two (user, system) for
// the two-stream endpointer.
struct FeatureSequence {
  std::vector<FeatureMatrix> streams;
  float frame_rate_hz = 25.0f;

  std::size_t n_streams() const { return streams.size(); }
  std::size_t num_frames() const {
    return streams.empty() ? 0 : static_cast<std::size_t>(streams[0].rows());
  }
  std::size_t dim() const {
    return streams.empty() ? 0 : static_cast<std::size_t>(streams[0].cols());
  }
  // Throws ConfigError on non-finite values or mismatched stream shapes.
  void validate() const;
};

enum class StreamMode { Mono, TwoStream };

struct SynthFeatureConfig {
  int dim = 16;
  int clusters_per_speaker = 4;
  // Distance of every speech cluster centre from the silence mean.
  float speech_margin = 8.0f;
  float speech_sigma = 0.3f;
  float silence_level = 0.0f;
  float silence_sigma = 0.8f;
  // Mean frames spent in a speech cluster before the Markov chain re-draws.
  float mean_dwell_frames = 3.0f;
  // Phrase-final cue: within the last `final_cue_ms` of a voiced segment the
  // speaker may settle into its cluster 0 (reserved for this purpose), with
  // one probability before a turn end and another before a mid-turn pause.
  // 0 disables the cue and makes every cluster ordinary.
  float final_cue_ms = 160.0f;
  float final_cue_prob = 0.9f;
  float pause_cue_prob = 0.1f;
  float frame_rate_hz = 25.0f;
  std::uint64_t rng_seed = 7;
};

// Per-speaker cluster centres, fixed by the config seed.
struct SpeakerClusters {
  std::vector<Eigen::VectorXf> user;
  std::vector<Eigen::VectorXf> system;
};

SpeakerClusters make_speaker_clusters(const SynthFeatureConfig& cfg);

// Renders frames for a script. Speech frames follow a Markov chain over the
// active speaker's clusters; silence, gaps and mid-turn pauses come from the
// silence distribution. Mono is the frame-wise average of the two streams.
FeatureSequence render_features(const DialogueScript& script,
                                const SynthFeatureConfig& cfg, StreamMode mode);

// True when `speaker` is voicing at time `ms` (inside a turn, not in a pause).
bool is_voiced(const DialogueScript& script, Speaker speaker, double ms);

struct LogMelConfig {
  int sample_rate = 8000;
  int n_mels = 40;
  int window = 640;  // 80 ms
  int hop = 320;     // 40 ms
  int n_fft = 1024;
  double epsilon = 1e-10;
};

// Triangular HTK-mel filters over [0, sample_rate/2]; n_mels x (n_fft/2+1).
Eigen::MatrixXd mel_filterbank(const LogMelConfig& cfg);

// Hamming-windowed power spectrum through the mel bank, natural log of
// (energy + epsilon). Input shorter than one window yields zero frames.
FeatureSequence logmel(std::span<const float> samples, const LogMelConfig& cfg = {});

// Block-mean pooling by `factor`; the trailing partial block is averaged over
// the frames it has.
FeatureSequence causal_downsample(const FeatureSequence& seq, int factor);

// Integer pooling factor taking `from_hz` to `to_hz`; throws if not integral.
int downsample_factor(double from_hz, double to_hz);

// Mean squared value of each frame of stream 0.
std::vector<double> frame_energy(const FeatureSequence& seq);

}  // namespace ep
