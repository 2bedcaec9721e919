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

#include "endpointer/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace ep {

LabeledDialogue label_dialogue(const DialogueScript& script, FeatureSequence features) {
  features.validate();
  LabeledDialogue d;
  d.script = script;
  const auto n = features.num_frames();
  d.labels = labels_from_script(script, features.frame_rate_hz, n);
  d.activity = system_activity_from_script(script, features.frame_rate_hz, n);
  d.features = std::move(features);
  return d;
}

std::vector<LabeledDialogue> build_dataset(const std::vector<DialogueScript>& scripts,
                                           const SynthFeatureConfig& cfg,
                                           StreamMode mode) {
  std::vector<LabeledDialogue> out;
  out.reserve(scripts.size());
  for (const auto& s : scripts) out.push_back(label_dialogue(s, render_features(s, cfg, mode)));
  return out;
}

void TrainConfig::validate() const {
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  if (!(lr > 0)) throw ConfigError("lr must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(eps > 0)) throw ConfigError("eps must be positive");
  if (!(window_s > 0)) throw ConfigError("window_s must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (delay_tau < 0) throw ConfigError("delay_tau must be non-negative");
  if (clip_norm < 0) throw ConfigError("clip_norm must be non-negative");
  if (windows_per_epoch < 0) throw ConfigError("windows_per_epoch must be non-negative");
}

nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},       {"lr", c.lr},
          {"beta1", c.beta1},         {"beta2", c.beta2},
          {"eps", c.eps},             {"window_s", c.window_s},
          {"batch_size", c.batch_size}, {"delay_tau", c.delay_tau},
          {"clip_norm", c.clip_norm}, {"windows_per_epoch", c.windows_per_epoch},
          {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.window_s = j.value("window_s", c.window_s);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.delay_tau = j.value("delay_tau", c.delay_tau);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.windows_per_epoch = j.value("windows_per_epoch", c.windows_per_epoch);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

Window sample_window(const LabeledDialogue& d, std::size_t index, double window_s, Rng& rng) {
  const auto& turns = d.script.turns;
  const auto n = d.num_frames();
  if (turns.empty() || n == 0) throw ConfigError("dialogue " + d.script.dialogue_id + " is empty");
  std::uniform_int_distribution<std::size_t> pick(0, turns.size() - 1);
  const auto& turn = turns[pick(rng)];
  const double rate = d.features.frame_rate_hz;
  const auto start =
      std::min(static_cast<std::size_t>(frame_at_or_after(static_cast<double>(turn.start_ms), rate)),
               n - 1);
  const auto cap = static_cast<std::size_t>(std::llround(window_s * rate));
  return {index, start, std::min(std::max<std::size_t>(cap, 1), n - start)};
}

SequenceExample make_example(const LabeledDialogue& d, const Window& w, int tau) {
  if (w.start_frame + w.length > d.num_frames()) throw ConfigError("window exceeds dialogue");
  SequenceExample e;
  const auto s = static_cast<Eigen::Index>(w.start_frame);
  const auto len = static_cast<Eigen::Index>(w.length);
  for (const auto& m : d.features.streams) e.streams.push_back(m.middleRows(s, len));
  e.flags.reserve(w.length);
  for (std::size_t t = 0; t < w.length; ++t) {
    e.flags.push_back(static_cast<int>(d.activity.flags[w.start_frame + t]));
  }
  LabelSequence local;
  local.frame_rate_hz = d.labels.frame_rate_hz;
  local.labels.assign(d.labels.labels.begin() + s, d.labels.labels.begin() + s + len);
  e.targets = apply_label_delay(local, std::min<int>(tau, static_cast<int>(w.length))).labels;
  return e;
}

SequenceExample full_example(const LabeledDialogue& d, int tau) {
  return make_example(d, {0, 0, d.num_frames()}, tau);
}

std::vector<ProbMatrix> forward_many(const Params<float>& params, const ModelConfig& cfg,
                                     const std::vector<LabeledDialogue>& dialogues) {
  std::vector<ProbMatrix> out;
  out.reserve(dialogues.size());
  for (const auto& d : dialogues) {
    if (static_cast<int>(d.features.dim()) != cfg.input_dim) {
      throw ConfigError("features of " + d.script.dialogue_id + " do not match the model input");
    }
    out.push_back(forward(params, cfg, d.features, &d.activity));
  }
  return out;
}

ValidationResult score_predictions(const std::vector<ProbMatrix>& probs,
                                   const std::vector<LabelSequence>& delayed) {
  if (probs.size() != delayed.size()) throw ConfigError("prediction/label count mismatch");
  ValidationResult r;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (static_cast<std::size_t>(probs[k].rows()) != delayed[k].size()) {
      throw ConfigError("prediction/label length mismatch");
    }
    for (std::size_t t = 0; t < delayed[k].size(); ++t) {
      const auto truth = delayed[k].labels[t];
      if (truth == FrameLabel::Pad) continue;
      Eigen::Index pred = 0;
      probs[k].row(static_cast<Eigen::Index>(t)).maxCoeff(&pred);
      ++r.confusion[static_cast<std::size_t>(class_index(truth))][static_cast<std::size_t>(pred)];
    }
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto total = std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), std::int64_t{0});
    r.present[c] = total > 0;
    r.recall[c] = total > 0 ? static_cast<double>(r.confusion[c][c]) / static_cast<double>(total) : 0.0;
  }
  int n = 0;
  for (std::size_t c : {std::size_t{0}, std::size_t{1}}) {
    if (r.present[c]) {
      r.score += r.recall[c];
      ++n;
    }
  }
  if (n > 0) r.score /= n;
  return r;
}

ValidationResult validate(const ModelCheckpoint& ckpt,
                          const std::vector<LabeledDialogue>& dialogues, int tau) {
  const auto probs = forward_many(ckpt.params, ckpt.config, dialogues);
  std::vector<LabelSequence> delayed;
  delayed.reserve(dialogues.size());
  for (const auto& d : dialogues) {
    delayed.push_back(apply_label_delay(d.labels, std::min<int>(tau, static_cast<int>(d.labels.size()))));
  }
  return score_predictions(probs, delayed);
}

nlohmann::json epoch_log_to_json(const EpochLog& l) {
  return {{"epoch", l.epoch},
          {"train_loss", l.train_loss},
          {"grad_norm", l.grad_norm},
          {"valid_score", l.valid_score},
          {"valid_recall", l.valid_recall},
          {"seconds", l.seconds}};
}

TrainResult train(const std::vector<LabeledDialogue>& train_set,
                  const std::vector<LabeledDialogue>& valid_set, ModelCheckpoint init,
                  const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  init.config.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (valid_set.empty()) throw ConfigError("validation set is empty");
  const float rate = train_set.front().features.frame_rate_hz;
  for (const auto* set : {&train_set, &valid_set}) {
    for (const auto& d : *set) {
      if (d.features.frame_rate_hz != rate || d.labels.frame_rate_hz != rate) {
        throw ConfigError("frame rate mismatch in dialogue " + d.script.dialogue_id);
      }
    }
  }

  AdamOptions opt{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.clip_norm};
  TrainResult result;
  ModelCheckpoint model = std::move(init);
  model.meta.delay_tau = cfg.delay_tau;
  model.meta.frame_rate_hz = rate;
  AdamState<float> adam = model.adam ? *model.adam : adam_init(model.params);
  Rng rng(derive_seed(cfg.seed, 0x7a11));
  const std::size_t per_epoch =
      cfg.windows_per_epoch > 0 ? static_cast<std::size_t>(cfg.windows_per_epoch) : train_set.size();
  bool have_best = false;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order;
    while (order.size() < per_epoch) {
      std::vector<std::size_t> perm(train_set.size());
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      order.insert(order.end(), perm.begin(), perm.end());
    }
    order.resize(per_epoch);

    double loss_sum = 0.0, norm_sum = 0.0;
    int batches = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch_size)) {
      const auto b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch_size));
      std::vector<SequenceExample> examples;
      for (std::size_t k = b0; k < b1; ++k) {
        const auto& d = train_set[order[k]];
        examples.push_back(make_example(d, sample_window(d, order[k], cfg.window_s, rng), cfg.delay_tau));
      }
      std::vector<const SequenceExample*> ptrs;
      for (const auto& e : examples) ptrs.push_back(&e);
      const auto batch = make_batch<float>(ptrs);
      auto grad = Params<float>::shaped_like(model.params);
      const auto lr = loss_and_gradient(model.params, model.config, batch, &grad);
      if (lr.sequences == 0) continue;  // all targets padded
      try {
        norm_sum += adam_step(model.params, grad, adam, opt);
      } catch (const std::runtime_error& e) {
        throw std::runtime_error("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      loss_sum += lr.loss;
      ++batches;
    }

    const auto v = validate(model, valid_set, cfg.delay_tau);
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = batches ? loss_sum / batches : 0.0;
    log.grad_norm = batches ? norm_sum / batches : 0.0;
    log.valid_score = v.score;
    log.valid_recall = v.recall;
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.push_back(log);

    model.meta.epoch = epoch;
    model.meta.validation_score = v.score;
    if (!have_best || v.score > result.best.meta.validation_score) {
      result.best = model;
      result.best.adam.reset();
      have_best = true;
    }
    if (on_epoch) on_epoch(log);
  }
  result.last = model;
  result.last.adam = adam;
  return result;
}

}  // namespace ep
