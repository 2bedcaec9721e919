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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "endpointer/features.hpp"
#include "endpointer/labels.hpp"

namespace ep {

enum class Arch { SingleStream, TwoStream };

// Endpointer shape. Single-stream adds a learned system-activity embedding to
// the projected features; two-stream runs both streams through a shared
// projector, then one recurrent stack each, and classifies the concatenation.
struct ModelConfig {
  Arch arch = Arch::SingleStream;
  int input_dim = 16;
  int proj_layers = 1;  // tanh layers before the recurrent stack
  int proj_dim = 32;
  int lstm_layers = 2;
  int hidden_dim = 32;
  int n_classes = kNumClasses;
  std::uint64_t rng_seed = 1;

  int n_streams() const { return arch == Arch::TwoStream ? 2 : 1; }
  int recurrent_input_dim() const { return proj_layers > 0 ? proj_dim : input_dim; }
  // Width of the system-activity embedding; 0 for two-stream.
  int sys_embed_dim() const {
    return arch == Arch::SingleStream ? recurrent_input_dim() : 0;
  }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);
const char* arch_name(Arch a);
Arch arch_from_name(const std::string& s);

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

template <typename T>
struct Dense {
  Mat<T> weight;  // out x in
  Mat<T> bias;    // out x 1
};

// Gate rows are ordered input, forget, cell, output.
template <typename T>
struct LstmLayer {
  Mat<T> w_ih;  // 4H x in
  Mat<T> w_hh;  // 4H x H
  Mat<T> bias;  // 4H x 1
};

template <typename T>
struct Params {
  std::vector<Dense<T>> proj;
  Mat<T> sys_embed;  // E x 2, columns indexed by Activity
  std::vector<std::vector<LstmLayer<T>>> stacks;  // [stream][layer]
  Dense<T> head;

  // Calls f(name, tensor) for every tensor in a fixed order.
  template <typename F>
  void visit(F&& f) {
    for_each_named(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    for_each_named(*this, f);
  }

  template <typename U>
  Params<U> cast() const {
    Params<U> out = Params<U>::shaped_like(*this);
    std::vector<const Mat<T>*> src;
    visit([&](const std::string&, const Mat<T>& m) { src.push_back(&m); });
    std::size_t i = 0;
    out.visit([&](const std::string&, Mat<U>& m) { m = src[i++]->template cast<U>(); });
    return out;
  }

  // Same tensor shapes as `other`, all zeros.
  template <typename U>
  static Params shaped_like(const Params<U>& other) {
    Params p;
    p.proj.resize(other.proj.size());
    p.stacks.resize(other.stacks.size());
    for (std::size_t s = 0; s < other.stacks.size(); ++s) {
      p.stacks[s].resize(other.stacks[s].size());
    }
    // placeholder so visit() includes the embedding
    if (other.sys_embed.size() > 0) p.sys_embed = Mat<T>::Zero(1, 1);
    std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
    other.visit([&](const std::string&, const Mat<U>& m) {
      shapes.emplace_back(m.rows(), m.cols());
    });
    std::size_t i = 0;
    p.visit([&](const std::string&, Mat<T>& m) {
      m = Mat<T>::Zero(shapes[i].first, shapes[i].second);
      ++i;
    });
    return p;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    visit([&](const std::string&, const Mat<T>& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

 private:
  template <typename Self, typename F>
  static void for_each_named(Self& self, F& f) {
    for (std::size_t i = 0; i < self.proj.size(); ++i) {
      const std::string p = "proj." + std::to_string(i);
      f(p + ".weight", self.proj[i].weight);
      f(p + ".bias", self.proj[i].bias);
    }
    if (self.sys_embed.size() > 0) f(std::string("sys_embed"), self.sys_embed);
    for (std::size_t s = 0; s < self.stacks.size(); ++s) {
      for (std::size_t l = 0; l < self.stacks[s].size(); ++l) {
        const std::string p = "lstm." + std::to_string(s) + "." + std::to_string(l);
        f(p + ".w_ih", self.stacks[s][l].w_ih);
        f(p + ".w_hh", self.stacks[s][l].w_hh);
        f(p + ".bias", self.stacks[s][l].bias);
      }
    }
    f(std::string("head.weight"), self.head.weight);
    f(std::string("head.bias"), self.head.bias);
  }
};

// Uniform(+-1/sqrt(fan_in)) weights, zero biases, forget-gate bias 1.
Params<float> init_params(const ModelConfig& cfg);

// Structural check of tensor shapes against the config.
template <typename T>
void check_shapes(const Params<T>& p, const ModelConfig& cfg);

template <typename T>
struct RecurrentState {
  // [stream][layer], each H x B
  std::vector<std::vector<Mat<T>>> h;
  std::vector<std::vector<Mat<T>>> c;
};

template <typename T>
RecurrentState<T> zero_state(const ModelConfig& cfg, Eigen::Index batch);

template <typename T>
struct LayerCache {
  Mat<T> input, h_prev, c_prev, i, f, g, o, c, tanh_c;
};

template <typename T>
struct StreamCache {
  std::vector<Mat<T>> acts;  // acts[0] = frame, acts[k+1] = projector layer k
  std::vector<LayerCache<T>> layers;
};

template <typename T>
struct StepCache {
  std::vector<StreamCache<T>> streams;
  std::vector<int> flags;
  Mat<T> head_in;
  Mat<T> probs;
};

// Advances the network by one frame for a batch of B columns. `frames[s]` is
// D x B for stream s; `flags` holds one Activity value per column and is only
// read by the single-stream model. Returns n_classes x B probabilities.
template <typename T>
Mat<T> step(const Params<T>& params, const ModelConfig& cfg,
            std::span<const Mat<T>> frames, std::span<const int> flags,
            RecurrentState<T>& state, StepCache<T>* cache = nullptr);

// A batch of equal-length (padded) sequences, time-major. target -1 marks a
// frame that contributes nothing to the loss (Pad or padding).
template <typename T>
struct Batch {
  std::vector<std::vector<Mat<T>>> frames;  // [t][stream] D x B
  std::vector<std::vector<int>> flags;      // [t][b]
  std::vector<std::vector<int>> targets;    // [t][b]
  Eigen::Index size() const {
    return frames.empty() ? 0 : frames[0][0].cols();
  }
};

// One training example: a window of features with its (delayed) targets.
struct SequenceExample {
  std::vector<FeatureMatrix> streams;
  std::vector<int> flags;
  std::vector<FrameLabel> targets;
  std::size_t length() const { return targets.size(); }
};

template <typename T>
Batch<T> make_batch(std::span<const SequenceExample* const> examples);

template <typename T>
struct LossResult {
  T loss = 0;
  std::int64_t frames = 0;  // contributing (non-Pad) frames
  int sequences = 0;        // sequences with at least one contributing frame
};

// Mean over sequences of the per-sequence mean cross-entropy on non-Pad
// frames. When `grad` is non-null it receives d loss / d params (full BPTT).
template <typename T>
LossResult<T> loss_and_gradient(const Params<T>& params, const ModelConfig& cfg,
                                const Batch<T>& batch, Params<T>* grad);

// Mean of -ln p[label] over non-Pad frames of one T x 4 probability matrix.
struct MaskedLoss {
  double loss = 0.0;
  std::int64_t count = 0;
};
MaskedLoss masked_loss(const Eigen::MatrixXd& probs, const LabelSequence& labels);

template <typename T>
struct AdamState {
  Params<T> m;
  Params<T> v;
  std::int64_t step = 0;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables clipping
};

template <typename T>
AdamState<T> adam_init(const Params<T>& params);

// Global-norm clip followed by one bias-corrected Adam update. Returns the
// pre-clip gradient norm; throws std::runtime_error on a non-finite gradient.
template <typename T>
double adam_step(Params<T>& params, Params<T>& grad, AdamState<T>& state,
                 const AdamOptions& opt);

// Full-sequence inference, one frame at a time (the same arithmetic as a
// streaming session). Single-stream requires `activity` of matching length.
using ProbMatrix = Eigen::Matrix<float, Eigen::Dynamic, 4, Eigen::RowMajor>;
ProbMatrix forward(const Params<float>& params, const ModelConfig& cfg,
                   const FeatureSequence& features,
                   const SystemActivitySequence* activity);

}  // namespace ep
