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

#include "endpointer/features.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>

#include <fftw3.h>

#include "endpointer/common.hpp"

namespace ep {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<Eigen::VectorXf> draw_clusters(Rng& rng, const SynthFeatureConfig& cfg) {
  std::normal_distribution<float> n01(0.0f, 1.0f);
  std::vector<Eigen::VectorXf> out;
  for (int c = 0; c < cfg.clusters_per_speaker; ++c) {
    Eigen::VectorXf v(cfg.dim);
    for (int d = 0; d < cfg.dim; ++d) v[d] = n01(rng);
    v *= cfg.speech_margin / v.norm();
    v.array() += cfg.silence_level;
    out.push_back(std::move(v));
  }
  return out;
}

// End of the voiced segment containing `ms` and whether it closes the turn
// (as opposed to running into a mid-turn pause).
struct SegmentEnd {
  std::int64_t end_ms = 0;
  bool turn_final = false;
};

std::optional<SegmentEnd> voiced_segment_end(const DialogueScript& script, Speaker speaker,
                                             double ms) {
  for (const Turn& t : script.turns) {
    if (t.speaker != speaker) continue;
    if (ms < static_cast<double>(t.start_ms) || ms >= static_cast<double>(t.end_ms)) continue;
    for (const auto& p : t.pauses) {
      if (ms < static_cast<double>(p.start_ms)) return SegmentEnd{p.start_ms, false};
    }
    return SegmentEnd{t.end_ms, true};
  }
  return std::nullopt;
}

void render_stream(const DialogueScript& script, Speaker speaker,
                   const std::vector<Eigen::VectorXf>& clusters,
                   const SynthFeatureConfig& cfg, std::size_t num_frames,
                   Rng& rng, FeatureMatrix& out) {
  std::normal_distribution<float> n01(0.0f, 1.0f);
  std::uniform_real_distribution<float> u01(0.0f, 1.0f);
  // Cluster 0 is reserved for phrase-final frames when cues are enabled.
  const bool cues = cfg.final_cue_ms > 0;
  std::uniform_int_distribution<int> pick(cues ? 1 : 0, cfg.clusters_per_speaker - 1);
  const float switch_p = 1.0f / std::max(1.0f, cfg.mean_dwell_frames);
  const double period = frame_period_ms(cfg.frame_rate_hz);
  int state = -1;
  std::int64_t cue_segment = -1;  // end time of the segment whose cue was drawn
  bool cue_on = false;
  out.resize(static_cast<Eigen::Index>(num_frames), cfg.dim);
  for (std::size_t i = 0; i < num_frames; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double ms = static_cast<double>(i) * period;
    if (is_voiced(script, speaker, ms)) {
      const auto seg = cues ? voiced_segment_end(script, speaker, ms) : std::nullopt;
      if (seg && static_cast<double>(seg->end_ms) - ms <= cfg.final_cue_ms) {
        if (cue_segment != seg->end_ms) {
          cue_segment = seg->end_ms;
          cue_on = u01(rng) < (seg->turn_final ? cfg.final_cue_prob : cfg.pause_cue_prob);
        }
      } else {
        cue_on = false;
      }
      if (cue_on) {
        state = 0;
      } else if (state <= 0 || u01(rng) < switch_p) {
        state = pick(rng);
      }
      const auto& mu = clusters[static_cast<std::size_t>(state)];
      for (int d = 0; d < cfg.dim; ++d) {
        out(row, d) = mu[d] + cfg.speech_sigma * n01(rng);
      }
    } else {
      state = -1;
      cue_on = false;
      for (int d = 0; d < cfg.dim; ++d) {
        out(row, d) = cfg.silence_level + cfg.silence_sigma * n01(rng);
      }
    }
  }
}

std::mutex fftw_planner_mutex;

}  // namespace

void FeatureSequence::validate() const {
  if (streams.empty() || streams.size() > 2) {
    throw ConfigError("feature sequence must have 1 or 2 streams");
  }
  if (!(frame_rate_hz > 0.0f)) throw ConfigError("frame rate must be positive");
  for (const auto& s : streams) {
    if (s.rows() != streams[0].rows() || s.cols() != streams[0].cols()) {
      throw ConfigError("feature streams differ in shape");
    }
    if (!s.allFinite()) throw ConfigError("feature sequence has non-finite values");
  }
}

bool is_voiced(const DialogueScript& script, Speaker speaker, double ms) {
  for (const Turn& t : script.turns) {
    if (t.speaker != speaker) continue;
    if (ms < static_cast<double>(t.start_ms) || ms >= static_cast<double>(t.end_ms)) {
      continue;
    }
    for (const auto& p : t.pauses) {
      if (ms >= static_cast<double>(p.start_ms) && ms < static_cast<double>(p.end_ms)) {
        return false;
      }
    }
    return true;
  }
  return false;
}

SpeakerClusters make_speaker_clusters(const SynthFeatureConfig& cfg) {
  if (cfg.dim <= 0 || cfg.clusters_per_speaker <= 0) {
    throw ConfigError("synthetic features need positive dim and cluster count");
  }
  if (cfg.final_cue_ms > 0 && cfg.clusters_per_speaker < 2) {
    throw ConfigError("phrase-final cues need at least two clusters per speaker");
  }
  if (!(cfg.final_cue_prob >= 0 && cfg.final_cue_prob <= 1) ||
      !(cfg.pause_cue_prob >= 0 && cfg.pause_cue_prob <= 1)) {
    throw ConfigError("cue probabilities must lie in [0, 1]");
  }
  if (!(cfg.frame_rate_hz > 0)) throw ConfigError("frame rate must be positive");
  Rng rng(derive_seed(cfg.rng_seed, 0xC1u));
  SpeakerClusters sc;
  sc.user = draw_clusters(rng, cfg);
  sc.system = draw_clusters(rng, cfg);
  return sc;
}

FeatureSequence render_features(const DialogueScript& script,
                                const SynthFeatureConfig& cfg, StreamMode mode) {
  const auto clusters = make_speaker_clusters(cfg);
  const auto n = static_cast<std::size_t>(std::ceil(
      static_cast<double>(script.total_duration_ms) * cfg.frame_rate_hz / 1000.0 -
      1e-9));
  const std::uint64_t key = fnv1a(script.dialogue_id);
  FeatureMatrix user;
  FeatureMatrix system;
  Rng rng_user(derive_seed(cfg.rng_seed, key * 2));
  Rng rng_system(derive_seed(cfg.rng_seed, key * 2 + 1));
  render_stream(script, Speaker::User, clusters.user, cfg, n, rng_user, user);
  render_stream(script, Speaker::System, clusters.system, cfg, n, rng_system, system);

  FeatureSequence seq;
  seq.frame_rate_hz = cfg.frame_rate_hz;
  if (mode == StreamMode::TwoStream) {
    seq.streams.push_back(std::move(user));
    seq.streams.push_back(std::move(system));
  } else {
    FeatureMatrix mono = (user + system) * 0.5f;
    seq.streams.push_back(std::move(mono));
  }
  return seq;
}

Eigen::MatrixXd mel_filterbank(const LogMelConfig& cfg) {
  auto hz_to_mel = [](double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); };
  auto mel_to_hz = [](double mel) {
    return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
  };
  const int n_bins = cfg.n_fft / 2 + 1;
  const double top = hz_to_mel(cfg.sample_rate / 2.0);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels + 2));
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top * static_cast<double>(i) /
                         static_cast<double>(cfg.n_mels + 1));
  }
  Eigen::MatrixXd bank = Eigen::MatrixXd::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double mid = edges[static_cast<std::size_t>(m + 1)];
    const double hi = edges[static_cast<std::size_t>(m + 2)];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / cfg.n_fft;
      if (f > lo && f <= mid) {
        bank(m, k) = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        bank(m, k) = (hi - f) / (hi - mid);
      }
    }
  }
  return bank;
}

FeatureSequence logmel(std::span<const float> samples, const LogMelConfig& cfg) {
  if (cfg.window <= 0 || cfg.hop <= 0 || cfg.n_fft < cfg.window || cfg.n_mels <= 0) {
    throw ConfigError("invalid log-mel configuration");
  }
  FeatureSequence seq;
  seq.frame_rate_hz = static_cast<float>(cfg.sample_rate) / static_cast<float>(cfg.hop);
  const auto n = static_cast<long>(samples.size());
  const long frames = n < cfg.window ? 0 : (n - cfg.window) / cfg.hop + 1;
  FeatureMatrix out(frames, cfg.n_mels);
  if (frames > 0) {
    const Eigen::MatrixXd bank = mel_filterbank(cfg);
    const int n_bins = cfg.n_fft / 2 + 1;
    std::vector<double> window(static_cast<std::size_t>(cfg.window));
    for (int i = 0; i < cfg.window; ++i) {
      window[static_cast<std::size_t>(i)] =
          0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (cfg.window - 1));
    }
    double* in = fftw_alloc_real(static_cast<std::size_t>(cfg.n_fft));
    fftw_complex* spec = fftw_alloc_complex(static_cast<std::size_t>(n_bins));
    fftw_plan plan;
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex);
      plan = fftw_plan_dft_r2c_1d(cfg.n_fft, in, spec, FFTW_ESTIMATE);
    }
    Eigen::VectorXd power(n_bins);
    for (long f = 0; f < frames; ++f) {
      const long off = f * cfg.hop;
      for (int i = 0; i < cfg.n_fft; ++i) {
        in[i] = i < cfg.window
                    ? samples[static_cast<std::size_t>(off + i)] *
                          window[static_cast<std::size_t>(i)]
                    : 0.0;
      }
      fftw_execute(plan);
      for (int k = 0; k < n_bins; ++k) {
        power[k] = spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
      }
      const Eigen::VectorXd mel = bank * power;
      for (int m = 0; m < cfg.n_mels; ++m) {
        out(f, m) = static_cast<float>(std::log(mel[m] + cfg.epsilon));
      }
    }
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex);
      fftw_destroy_plan(plan);
    }
    fftw_free(spec);
    fftw_free(in);
  }
  seq.streams.push_back(std::move(out));
  return seq;
}

FeatureSequence causal_downsample(const FeatureSequence& seq, int factor) {
  if (factor <= 0) {
    throw ConfigError("downsample factor must be >= 1, got " + std::to_string(factor));
  }
  FeatureSequence out;
  out.frame_rate_hz = seq.frame_rate_hz / static_cast<float>(factor);
  for (const auto& s : seq.streams) {
    const Eigen::Index t = s.rows();
    const Eigen::Index blocks = (t + factor - 1) / factor;
    FeatureMatrix pooled(blocks, s.cols());
    for (Eigen::Index j = 0; j < blocks; ++j) {
      const Eigen::Index begin = j * factor;
      const Eigen::Index len = std::min<Eigen::Index>(factor, t - begin);
      pooled.row(j) = s.middleRows(begin, len).colwise().sum() / static_cast<float>(len);
    }
    out.streams.push_back(std::move(pooled));
  }
  return out;
}

int downsample_factor(double from_hz, double to_hz) {
  if (!(from_hz > 0) || !(to_hz > 0) || to_hz > from_hz) {
    throw ConfigError("cannot downsample from " + std::to_string(from_hz) +
                      " Hz to " + std::to_string(to_hz) + " Hz");
  }
  const double r = from_hz / to_hz;
  const double rounded = std::round(r);
  if (std::abs(r - rounded) > 1e-9) {
    throw ConfigError("frame rates are not an integer multiple");
  }
  return static_cast<int>(rounded);
}

std::vector<double> frame_energy(const FeatureSequence& seq) {
  std::vector<double> e;
  if (seq.streams.empty()) return e;
  const auto& s = seq.streams[0];
  e.reserve(static_cast<std::size_t>(s.rows()));
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    e.push_back(static_cast<double>(s.row(i).squaredNorm()) /
                static_cast<double>(s.cols()));
  }
  return e;
}

}  // namespace ep
