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

#include "endpointer/model.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "endpointer/common.hpp"

namespace ep {

namespace {

template <typename T>
Mat<T> sigmoid(const Mat<T>& x) {
  return (T(1) / (T(1) + (-x.array()).exp())).matrix();
}

template <typename T>
Mat<T> softmax_columns(const Mat<T>& logits) {
  Mat<T> out(logits.rows(), logits.cols());
  for (Eigen::Index b = 0; b < logits.cols(); ++b) {
    const T m = logits.col(b).maxCoeff();
    auto e = (logits.col(b).array() - m).exp();
    out.col(b) = (e / e.sum()).matrix();
  }
  return out;
}

void fill_uniform(Mat<float>& m, float bound, Rng& rng) {
  std::uniform_real_distribution<float> u(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (input_dim <= 0 || hidden_dim <= 0 || lstm_layers <= 0 || proj_layers < 0 ||
      (proj_layers > 0 && proj_dim <= 0)) {
    throw ConfigError("model dimensions must be positive");
  }
  if (n_classes != kNumClasses) {
    throw ConfigError("endpointer models have exactly 4 output classes");
  }
}

const char* arch_name(Arch a) {
  return a == Arch::TwoStream ? "two" : "single";
}

Arch arch_from_name(const std::string& s) {
  if (s == "single" || s == "single-stream") return Arch::SingleStream;
  if (s == "two" || s == "two-stream") return Arch::TwoStream;
  throw ConfigError("unknown architecture '" + s + "' (single|two)");
}

nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"arch", arch_name(c.arch)},       {"input_dim", c.input_dim},
          {"proj_layers", c.proj_layers},    {"proj_dim", c.proj_dim},
          {"lstm_layers", c.lstm_layers},    {"hidden_dim", c.hidden_dim},
          {"n_classes", c.n_classes},        {"rng_seed", c.rng_seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    if (j.contains("arch")) c.arch = arch_from_name(j["arch"].get<std::string>());
    c.input_dim = j.value("input_dim", c.input_dim);
    c.proj_layers = j.value("proj_layers", c.proj_layers);
    c.proj_dim = j.value("proj_dim", c.proj_dim);
    c.lstm_layers = j.value("lstm_layers", c.lstm_layers);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.n_classes = j.value("n_classes", c.n_classes);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  c.validate();
  return c;
}

Params<float> init_params(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.rng_seed, 0x1417));
  Params<float> p;
  int in = cfg.input_dim;
  for (int k = 0; k < cfg.proj_layers; ++k) {
    Dense<float> d;
    d.weight.resize(cfg.proj_dim, in);
    fill_uniform(d.weight, 1.0f / std::sqrt(static_cast<float>(in)), rng);
    d.bias = Mat<float>::Zero(cfg.proj_dim, 1);
    p.proj.push_back(std::move(d));
    in = cfg.proj_dim;
  }
  if (cfg.arch == Arch::SingleStream) {
    p.sys_embed.resize(cfg.sys_embed_dim(), 2);
    fill_uniform(p.sys_embed, 1.0f / std::sqrt(static_cast<float>(cfg.sys_embed_dim())), rng);
  }
  const int h = cfg.hidden_dim;
  p.stacks.resize(static_cast<std::size_t>(cfg.n_streams()));
  for (auto& stack : p.stacks) {
    int layer_in = cfg.recurrent_input_dim();
    for (int l = 0; l < cfg.lstm_layers; ++l) {
      LstmLayer<float> layer;
      layer.w_ih.resize(4 * h, layer_in);
      layer.w_hh.resize(4 * h, h);
      fill_uniform(layer.w_ih, 1.0f / std::sqrt(static_cast<float>(layer_in)), rng);
      fill_uniform(layer.w_hh, 1.0f / std::sqrt(static_cast<float>(h)), rng);
      layer.bias = Mat<float>::Zero(4 * h, 1);
      layer.bias.middleRows(h, h).setConstant(1.0f);
      stack.push_back(std::move(layer));
      layer_in = h;
    }
  }
  const int head_in = h * cfg.n_streams();
  p.head.weight.resize(cfg.n_classes, head_in);
  fill_uniform(p.head.weight, 1.0f / std::sqrt(static_cast<float>(head_in)), rng);
  p.head.bias = Mat<float>::Zero(cfg.n_classes, 1);
  return p;
}

template <typename T>
void check_shapes(const Params<T>& p, const ModelConfig& cfg) {
  auto expect = [](const Mat<T>& m, Eigen::Index r, Eigen::Index c, const std::string& n) {
    if (m.rows() != r || m.cols() != c) {
      throw ConfigError("tensor " + n + " has shape " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + ", config expects " +
                        std::to_string(r) + "x" + std::to_string(c));
    }
  };
  if (static_cast<int>(p.proj.size()) != cfg.proj_layers ||
      static_cast<int>(p.stacks.size()) != cfg.n_streams()) {
    throw ConfigError("parameter layout does not match model config");
  }
  int in = cfg.input_dim;
  for (std::size_t k = 0; k < p.proj.size(); ++k) {
    expect(p.proj[k].weight, cfg.proj_dim, in, "proj.weight");
    expect(p.proj[k].bias, cfg.proj_dim, 1, "proj.bias");
    in = cfg.proj_dim;
  }
  if (cfg.arch == Arch::SingleStream) {
    expect(p.sys_embed, cfg.sys_embed_dim(), 2, "sys_embed");
  } else if (p.sys_embed.size() != 0) {
    throw ConfigError("two-stream model must not carry a system embedding");
  }
  const int h = cfg.hidden_dim;
  for (const auto& stack : p.stacks) {
    if (static_cast<int>(stack.size()) != cfg.lstm_layers) {
      throw ConfigError("recurrent layer count does not match model config");
    }
    int layer_in = cfg.recurrent_input_dim();
    for (const auto& l : stack) {
      expect(l.w_ih, 4 * h, layer_in, "lstm.w_ih");
      expect(l.w_hh, 4 * h, h, "lstm.w_hh");
      expect(l.bias, 4 * h, 1, "lstm.bias");
      layer_in = h;
    }
  }
  expect(p.head.weight, cfg.n_classes, h * cfg.n_streams(), "head.weight");
  expect(p.head.bias, cfg.n_classes, 1, "head.bias");
}

template <typename T>
RecurrentState<T> zero_state(const ModelConfig& cfg, Eigen::Index batch) {
  RecurrentState<T> s;
  s.h.resize(static_cast<std::size_t>(cfg.n_streams()));
  s.c.resize(static_cast<std::size_t>(cfg.n_streams()));
  for (int k = 0; k < cfg.n_streams(); ++k) {
    for (int l = 0; l < cfg.lstm_layers; ++l) {
      s.h[static_cast<std::size_t>(k)].push_back(Mat<T>::Zero(cfg.hidden_dim, batch));
      s.c[static_cast<std::size_t>(k)].push_back(Mat<T>::Zero(cfg.hidden_dim, batch));
    }
  }
  return s;
}

template <typename T>
Mat<T> step(const Params<T>& params, const ModelConfig& cfg,
            std::span<const Mat<T>> frames, std::span<const int> flags,
            RecurrentState<T>& state, StepCache<T>* cache) {
  const int n_streams = cfg.n_streams();
  if (static_cast<int>(frames.size()) != n_streams) {
    throw ConfigError("expected " + std::to_string(n_streams) + " feature streams");
  }
  const Eigen::Index batch = frames[0].cols();
  const int h = cfg.hidden_dim;
  if (cache) {
    cache->streams.resize(static_cast<std::size_t>(n_streams));
    cache->flags.assign(flags.begin(), flags.end());
  }
  Mat<T> head_in(h * n_streams, batch);
  for (int s = 0; s < n_streams; ++s) {
    const auto su = static_cast<std::size_t>(s);
    const Mat<T>& frame = frames[su];
    if (frame.rows() != cfg.input_dim || frame.cols() != batch) {
      throw ConfigError("feature dim " + std::to_string(frame.rows()) +
                        " does not match model input_dim " + std::to_string(cfg.input_dim));
    }
    StreamCache<T>* sc = cache ? &cache->streams[su] : nullptr;
    if (sc) {
      sc->acts.clear();
      sc->acts.push_back(frame);
      sc->layers.resize(static_cast<std::size_t>(cfg.lstm_layers));
    }
    Mat<T> x = frame;
    for (const auto& d : params.proj) {
      x = ((d.weight * x).colwise() + d.bias.col(0)).array().tanh().matrix();
      if (sc) sc->acts.push_back(x);
    }
    if (cfg.arch == Arch::SingleStream) {
      if (static_cast<Eigen::Index>(flags.size()) != batch) {
        throw ConfigError("single-stream model needs one activity flag per sequence");
      }
      for (Eigen::Index b = 0; b < batch; ++b) {
        x.col(b) += params.sys_embed.col(flags[static_cast<std::size_t>(b)]);
      }
    }
    for (int l = 0; l < cfg.lstm_layers; ++l) {
      const auto lu = static_cast<std::size_t>(l);
      const auto& layer = params.stacks[su][lu];
      Mat<T>& hs = state.h[su][lu];
      Mat<T>& cs = state.c[su][lu];
      Mat<T> gates = layer.w_ih * x + layer.w_hh * hs;
      gates.colwise() += layer.bias.col(0);
      Mat<T> gi = sigmoid<T>(gates.topRows(h));
      Mat<T> gf = sigmoid<T>(gates.middleRows(h, h));
      Mat<T> gg = gates.middleRows(2 * h, h).array().tanh().matrix();
      Mat<T> go = sigmoid<T>(gates.bottomRows(h));
      Mat<T> c = (gf.array() * cs.array() + gi.array() * gg.array()).matrix();
      Mat<T> tc = c.array().tanh().matrix();
      Mat<T> hn = (go.array() * tc.array()).matrix();
      if (sc) {
        auto& lc = sc->layers[lu];
        lc.input = x;
        lc.h_prev = hs;
        lc.c_prev = cs;
        lc.i = gi;
        lc.f = gf;
        lc.g = gg;
        lc.o = go;
        lc.c = c;
        lc.tanh_c = tc;
      }
      cs = std::move(c);
      hs = std::move(hn);
      x = hs;
    }
    head_in.middleRows(s * h, h) = x;
  }
  Mat<T> logits = params.head.weight * head_in;
  logits.colwise() += params.head.bias.col(0);
  Mat<T> probs = softmax_columns<T>(logits);
  if (cache) {
    cache->head_in = std::move(head_in);
    cache->probs = probs;
  }
  return probs;
}

template <typename T>
Batch<T> make_batch(std::span<const SequenceExample* const> examples) {
  Batch<T> batch;
  if (examples.empty()) return batch;
  std::size_t max_len = 0;
  for (const auto* e : examples) max_len = std::max(max_len, e->length());
  const auto n_streams = examples[0]->streams.size();
  const auto dim = examples[0]->streams[0].cols();
  const auto bsz = static_cast<Eigen::Index>(examples.size());
  batch.frames.resize(max_len);
  batch.flags.assign(max_len, std::vector<int>(examples.size(), 1));
  batch.targets.assign(max_len, std::vector<int>(examples.size(), -1));
  for (std::size_t t = 0; t < max_len; ++t) {
    batch.frames[t].assign(n_streams, Mat<T>::Zero(dim, bsz));
  }
  for (std::size_t b = 0; b < examples.size(); ++b) {
    const auto& e = *examples[b];
    const auto bi = static_cast<Eigen::Index>(b);
    for (std::size_t t = 0; t < e.length(); ++t) {
      const auto ti = static_cast<Eigen::Index>(t);
      for (std::size_t s = 0; s < n_streams; ++s) {
        batch.frames[t][s].col(bi) = e.streams[s].row(ti).transpose().template cast<T>();
      }
      if (!e.flags.empty()) batch.flags[t][b] = e.flags[t];
      batch.targets[t][b] =
          e.targets[t] == FrameLabel::Pad ? -1 : class_index(e.targets[t]);
    }
  }
  return batch;
}

template <typename T>
LossResult<T> loss_and_gradient(const Params<T>& params, const ModelConfig& cfg,
                                const Batch<T>& batch, Params<T>* grad) {
  LossResult<T> result;
  const auto steps = batch.frames.size();
  const Eigen::Index bsz = batch.size();
  if (steps == 0 || bsz == 0) return result;

  // Per-sequence weights: 1 / (contributing frames * contributing sequences).
  std::vector<std::int64_t> counts(static_cast<std::size_t>(bsz), 0);
  for (const auto& row : batch.targets) {
    for (Eigen::Index b = 0; b < bsz; ++b) {
      if (row[static_cast<std::size_t>(b)] >= 0) ++counts[static_cast<std::size_t>(b)];
    }
  }
  for (auto c : counts) {
    if (c > 0) ++result.sequences;
    result.frames += c;
  }
  if (result.sequences == 0) return result;
  std::vector<T> weight(static_cast<std::size_t>(bsz), T(0));
  for (Eigen::Index b = 0; b < bsz; ++b) {
    const auto c = counts[static_cast<std::size_t>(b)];
    if (c > 0) {
      weight[static_cast<std::size_t>(b)] =
          T(1) / (static_cast<T>(c) * static_cast<T>(result.sequences));
    }
  }

  auto state = zero_state<T>(cfg, bsz);
  std::vector<StepCache<T>> caches(grad ? steps : 0);
  T loss = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    StepCache<T>* cache = grad ? &caches[t] : nullptr;
    Mat<T> probs = step<T>(params, cfg, batch.frames[t], batch.flags[t], state, cache);
    for (Eigen::Index b = 0; b < bsz; ++b) {
      const int y = batch.targets[t][static_cast<std::size_t>(b)];
      if (y < 0) continue;
      loss -= weight[static_cast<std::size_t>(b)] * std::log(probs(y, b));
    }
  }
  result.loss = loss;
  if (!grad) return result;

  *grad = Params<T>::shaped_like(params);
  const int h = cfg.hidden_dim;
  const int n_streams = cfg.n_streams();
  auto carry = zero_state<T>(cfg, bsz);  // dL/dh and dL/dc flowing back in time
  for (std::size_t t = steps; t-- > 0;) {
    const StepCache<T>& cache = caches[t];
    Mat<T> dlogits = cache.probs;
    for (Eigen::Index b = 0; b < bsz; ++b) {
      const int y = batch.targets[t][static_cast<std::size_t>(b)];
      if (y < 0) {
        dlogits.col(b).setZero();
        continue;
      }
      dlogits(y, b) -= T(1);
      dlogits.col(b) *= weight[static_cast<std::size_t>(b)];
    }
    grad->head.weight.noalias() += dlogits * cache.head_in.transpose();
    grad->head.bias += dlogits.rowwise().sum();
    const Mat<T> dhead = params.head.weight.transpose() * dlogits;

    for (int s = 0; s < n_streams; ++s) {
      const auto su = static_cast<std::size_t>(s);
      const StreamCache<T>& sc = cache.streams[su];
      Mat<T> d_above = dhead.middleRows(s * h, h);
      for (int l = cfg.lstm_layers; l-- > 0;) {
        const auto lu = static_cast<std::size_t>(l);
        const LayerCache<T>& lc = sc.layers[lu];
        const auto& layer = params.stacks[su][lu];
        auto& glayer = grad->stacks[su][lu];
        const Mat<T> dh = d_above + carry.h[su][lu];
        const auto tc2 = (T(1) - lc.tanh_c.array().square());
        const Mat<T> dc = (carry.c[su][lu].array() + dh.array() * lc.o.array() * tc2).matrix();
        Mat<T> dgates(4 * h, bsz);
        dgates.topRows(h) = (dc.array() * lc.g.array() * lc.i.array() * (T(1) - lc.i.array())).matrix();
        dgates.middleRows(h, h) =
            (dc.array() * lc.c_prev.array() * lc.f.array() * (T(1) - lc.f.array())).matrix();
        dgates.middleRows(2 * h, h) =
            (dc.array() * lc.i.array() * (T(1) - lc.g.array().square())).matrix();
        dgates.bottomRows(h) =
            (dh.array() * lc.tanh_c.array() * lc.o.array() * (T(1) - lc.o.array())).matrix();
        glayer.w_ih.noalias() += dgates * lc.input.transpose();
        glayer.w_hh.noalias() += dgates * lc.h_prev.transpose();
        glayer.bias += dgates.rowwise().sum();
        carry.h[su][lu] = layer.w_hh.transpose() * dgates;
        carry.c[su][lu] = (dc.array() * lc.f.array()).matrix();
        d_above = layer.w_ih.transpose() * dgates;
      }
      if (cfg.arch == Arch::SingleStream) {
        for (Eigen::Index b = 0; b < bsz; ++b) {
          grad->sys_embed.col(cache.flags[static_cast<std::size_t>(b)]) += d_above.col(b);
        }
      }
      for (std::size_t k = params.proj.size(); k-- > 0;) {
        const Mat<T>& a = sc.acts[k + 1];
        const Mat<T> dz = (d_above.array() * (T(1) - a.array().square())).matrix();
        grad->proj[k].weight.noalias() += dz * sc.acts[k].transpose();
        grad->proj[k].bias += dz.rowwise().sum();
        if (k > 0) d_above = params.proj[k].weight.transpose() * dz;
      }
    }
  }
  return result;
}

MaskedLoss masked_loss(const Eigen::MatrixXd& probs, const LabelSequence& labels) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size()) {
    throw ConfigError("probability and label lengths differ");
  }
  MaskedLoss out;
  double acc = 0.0;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels.labels[t] == FrameLabel::Pad) continue;
    acc -= std::log(probs(static_cast<Eigen::Index>(t), class_index(labels.labels[t])));
    ++out.count;
  }
  out.loss = out.count > 0 ? acc / static_cast<double>(out.count) : 0.0;
  return out;
}

template <typename T>
AdamState<T> adam_init(const Params<T>& params) {
  return {Params<T>::shaped_like(params), Params<T>::shaped_like(params), 0};
}

template <typename T>
double adam_step(Params<T>& params, Params<T>& grad, AdamState<T>& state,
                 const AdamOptions& opt) {
  double sq = 0.0;
  grad.visit([&](const std::string&, const Mat<T>& g) {
    sq += g.template cast<double>().squaredNorm();
  });
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) {
    throw std::runtime_error("non-finite gradient norm");
  }
  if (opt.clip_norm > 0.0 && norm > opt.clip_norm) {
    const T scale = static_cast<T>(opt.clip_norm / norm);
    grad.visit([&](const std::string&, Mat<T>& g) { g *= scale; });
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  std::vector<Mat<T>*> ps, gs, ms, vs;
  params.visit([&](const std::string&, Mat<T>& m) { ps.push_back(&m); });
  grad.visit([&](const std::string&, Mat<T>& m) { gs.push_back(&m); });
  state.m.visit([&](const std::string&, Mat<T>& m) { ms.push_back(&m); });
  state.v.visit([&](const std::string&, Mat<T>& m) { vs.push_back(&m); });
  const T b1 = static_cast<T>(opt.beta1);
  const T b2 = static_cast<T>(opt.beta2);
  const T step_size = static_cast<T>(opt.lr / bc1);
  const T inv_sqrt_bc2 = static_cast<T>(1.0 / std::sqrt(bc2));
  const T eps = static_cast<T>(opt.eps);
  for (std::size_t k = 0; k < ps.size(); ++k) {
    auto& m = *ms[k];
    auto& v = *vs[k];
    const auto& g = *gs[k];
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
    ps[k]->array() -=
        step_size * m.array() / (v.array().sqrt() * inv_sqrt_bc2 + eps);
  }
  return norm;
}

ProbMatrix forward(const Params<float>& params, const ModelConfig& cfg,
                   const FeatureSequence& features,
                   const SystemActivitySequence* activity) {
  if (static_cast<int>(features.n_streams()) != cfg.n_streams()) {
    throw ConfigError("model expects " + std::to_string(cfg.n_streams()) +
                      " streams, features have " + std::to_string(features.n_streams()));
  }
  const auto t_len = features.num_frames();
  if (cfg.arch == Arch::SingleStream) {
    if (!activity) throw ConfigError("single-stream forward needs system activity");
    if (activity->flags.size() != t_len) {
      throw ConfigError("system activity length " + std::to_string(activity->flags.size()) +
                        " != feature length " + std::to_string(t_len));
    }
  }
  ProbMatrix out(static_cast<Eigen::Index>(t_len), 4);
  auto state = zero_state<float>(cfg, 1);
  std::vector<Mat<float>> frames(features.n_streams());
  int flag = static_cast<int>(Activity::NonSystem);
  for (std::size_t t = 0; t < t_len; ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    for (std::size_t s = 0; s < frames.size(); ++s) {
      frames[s] = features.streams[s].row(ti).transpose();
    }
    if (activity) flag = static_cast<int>(activity->flags[t]);
    const Mat<float> p = step<float>(params, cfg, frames, std::span<const int>(&flag, 1), state);
    out.row(ti) = p.col(0).transpose();
  }
  return out;
}

template void check_shapes(const Params<float>&, const ModelConfig&);
template void check_shapes(const Params<double>&, const ModelConfig&);
template RecurrentState<float> zero_state(const ModelConfig&, Eigen::Index);
template RecurrentState<double> zero_state(const ModelConfig&, Eigen::Index);
template Mat<float> step(const Params<float>&, const ModelConfig&, std::span<const Mat<float>>,
                         std::span<const int>, RecurrentState<float>&, StepCache<float>*);
template Mat<double> step(const Params<double>&, const ModelConfig&,
                          std::span<const Mat<double>>, std::span<const int>,
                          RecurrentState<double>&, StepCache<double>*);
template Batch<float> make_batch(std::span<const SequenceExample* const>);
template Batch<double> make_batch(std::span<const SequenceExample* const>);
template LossResult<float> loss_and_gradient(const Params<float>&, const ModelConfig&,
                                             const Batch<float>&, Params<float>*);
template LossResult<double> loss_and_gradient(const Params<double>&, const ModelConfig&,
                                              const Batch<double>&, Params<double>*);
template AdamState<float> adam_init(const Params<float>&);
template AdamState<double> adam_init(const Params<double>&);
template double adam_step(Params<float>&, Params<float>&, AdamState<float>&, const AdamOptions&);
template double adam_step(Params<double>&, Params<double>&, AdamState<double>&,
                          const AdamOptions&);

}  // namespace ep
