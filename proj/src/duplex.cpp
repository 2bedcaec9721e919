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

#include "endpointer/duplex.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "endpointer/detector.hpp"
#include "endpointer/eval.hpp"

namespace ep {

const char* agent_state_name(AgentState s) {
  switch (s) {
    case AgentState::Speaking: return "speaking";
    case AgentState::Listening: return "listening";
    case AgentState::Responding: return "responding";
  }
  return "?";
}

void AgentConfig::validate() const {
  if (opening_ms.min <= 0 || opening_ms.min > opening_ms.max) throw ConfigError("bad opening_ms range");
  if (response_ms.min <= 0 || response_ms.min > response_ms.max) throw ConfigError("bad response_ms range");
  if (!(barge_in_prob >= 0 && barge_in_prob <= 1)) throw ConfigError("barge_in_prob must lie in [0, 1]");
  if (onset_delay_ms < 0 || onset_jitter_ms < 0) throw ConfigError("onset delay and jitter must be non-negative");
}

ScriptedAgent::ScriptedAgent(const AgentConfig& cfg, const SynthFeatureConfig& features,
                             std::uint64_t seed)
    : fcfg_(features), clusters_(make_speaker_clusters(features).system), rng_(seed) {
  cfg.validate();
}

void ScriptedAgent::begin_opening(std::int64_t frames) {
  state_ = frames > 0 ? AgentState::Speaking : AgentState::Listening;
  remaining_ = frames;
  cluster_ = -1;
  cue_drawn_ = false;
}

Eigen::VectorXf ScriptedAgent::silence_frame() {
  std::normal_distribution<float> n01(0.0f, 1.0f);
  Eigen::VectorXf v(fcfg_.dim);
  for (int d = 0; d < fcfg_.dim; ++d) v[d] = fcfg_.silence_level + fcfg_.silence_sigma * n01(rng_);
  return v;
}

// Same generative model as the synthetic renderer: Markov dwell over the
// speaker's clusters, with a chance of a phrase-final cue before the end.
Eigen::VectorXf ScriptedAgent::speech_frame(std::int64_t remaining) {
  std::normal_distribution<float> n01(0.0f, 1.0f);
  std::uniform_real_distribution<float> u01(0.0f, 1.0f);
  const bool cues = fcfg_.final_cue_ms > 0;
  std::uniform_int_distribution<int> pick(cues ? 1 : 0, fcfg_.clusters_per_speaker - 1);
  const float switch_p = 1.0f / std::max(1.0f, fcfg_.mean_dwell_frames);
  const double period = frame_period_ms(fcfg_.frame_rate_hz);
  if (cues && static_cast<double>(remaining - 1) * period < fcfg_.final_cue_ms) {
    if (!cue_drawn_) {
      cue_drawn_ = true;
      cue_on_ = u01(rng_) < fcfg_.final_cue_prob;
    }
  } else {
    cue_on_ = false;
  }
  if (cue_on_) {
    cluster_ = 0;
  } else if (cluster_ <= 0 || u01(rng_) < switch_p) {
    cluster_ = pick(rng_);
  }
  Eigen::VectorXf v = clusters_[static_cast<std::size_t>(cluster_)];
  for (int d = 0; d < fcfg_.dim; ++d) v[d] += fcfg_.speech_sigma * n01(rng_);
  return v;
}

AgentFrame ScriptedAgent::step(std::optional<ControlToken> control) {
  AgentFrame out;
  const std::int64_t now = frame_++;
  if (control == ControlToken::Pad) {
    out.features = silence_frame();
    out.state = state_;
    return out;
  }
  if (control == ControlToken::Unk) {
    if (state_ == AgentState::Speaking) {
      ++ignored_unk_;
      std::fprintf(stderr, "agent: unk while speaking at step %lld ignored\n",
                   static_cast<long long>(now));
    } else if (state_ == AgentState::Listening) {
      respond_next_ = true;
      out.features = silence_frame();
      out.state = state_;
      return out;
    }
  }
  if (state_ == AgentState::Listening &&
      (respond_next_ || (scheduled_onset_ && now >= *scheduled_onset_))) {
    state_ = AgentState::Responding;
    remaining_ = std::max<std::int64_t>(1, response_frames_);
    respond_next_ = false;
    scheduled_onset_.reset();
    onset_ = now;
    cluster_ = -1;
    cue_drawn_ = false;
  }
  if (state_ == AgentState::Listening) {
    out.features = silence_frame();
  } else {
    out.features = speech_frame(remaining_);
    out.speech = true;
    if (--remaining_ <= 0) state_ = AgentState::Listening;
  }
  out.state = state_;
  return out;
}

std::vector<Query> make_queries(const CorpusConfig& corpus, std::size_t n, std::int64_t min_ms) {
  CorpusConfig cfg = corpus;
  cfg.rng_seed = derive_seed(corpus.rng_seed, 0x9e7);
  cfg.validate();
  std::vector<Query> out;
  for (std::uint64_t idx = 0; out.size() < n; ++idx) {
    if (idx > 100 * n + 1000) throw ConfigError("corpus settings yield no queries longer than min_ms");
    const auto d = generate_dialogue(cfg, idx);
    for (const Turn& t : d.turns) {
      if (t.speaker != Speaker::User || t.end_ms - t.start_ms <= min_ms) continue;
      Turn q{Speaker::User, 0, t.end_ms - t.start_ms, {}};
      for (const auto& p : t.pauses) q.pauses.push_back({p.start_ms - t.start_ms, p.end_ms - t.start_ms});
      char id[32];
      std::snprintf(id, sizeof id, "q%05zu", out.size());
      out.push_back({id, DialogueScript{id, {q}, q.end_ms}});
      break;
    }
  }
  return out;
}

namespace {

std::int64_t frames_of(std::int64_t ms, double rate) {
  return std::max<std::int64_t>(1, std::llround(static_cast<double>(ms) * rate / 1000.0));
}

std::int64_t uniform(Rng& rng, const IntRange& r) {
  return std::uniform_int_distribution<std::int64_t>(r.min, r.max)(rng);
}

DuplexOutcome simulate_query(const Query& q, std::size_t index, const AgentConfig& acfg,
                             const SynthFeatureConfig& fcfg, const DuplexConfig& cfg) {
  const double rate = fcfg.frame_rate_hz;
  const double period = frame_period_ms(rate);
  Rng rng(derive_seed(cfg.seed, index));
  ScriptedAgent agent(acfg, fcfg, derive_seed(acfg.rng_seed, index));
  const auto opening = frames_of(uniform(rng, acfg.opening_ms), rate);
  agent.begin_opening(opening);
  agent.set_response_frames(frames_of(uniform(rng, acfg.response_ms), rate));
  const auto pause = frames_of(uniform(rng, cfg.pause_ms), rate);
  const FeatureMatrix query = render_features(q.script, fcfg, StreamMode::TwoStream).streams[0];
  const auto q_frames = static_cast<std::int64_t>(query.rows());
  const auto end_offset = frame_at_or_after(static_cast<double>(q.duration_ms()), rate);

  const bool use_model = cfg.mode == DuplexMode::Endpointer && cfg.model;
  std::optional<DetectorSession> session;
  if (use_model) {
    session.emplace(cfg.model, cfg.threshold, rate, true);
    session->disarm(Speaker::User);
    session->rearm(Speaker::System);
  }

  std::normal_distribution<float> n01(0.0f, 1.0f);
  auto user_silence = [&] {
    Eigen::VectorXf v(fcfg.dim);
    for (int d = 0; d < fcfg.dim; ++d) v[d] = fcfg.silence_level + fcfg.silence_sigma * n01(rng);
    return v;
  };

  // The agent's output at step f is heard on the system stream at frame f+1.
  Eigen::VectorXf system_frame = Eigen::VectorXf::Constant(fcfg.dim, fcfg.silence_level);
  std::optional<std::int64_t> query_start, trigger;
  bool unk_pending = false;  // an Unk arrived while the agent was still speaking
  DuplexOutcome out;
  out.query_id = q.id;
  const auto sys_timeout = frames_of(cfg.system_end_timeout_ms, rate);
  const auto max_wait = frames_of(cfg.max_wait_ms, rate);
  const bool barge = std::uniform_real_distribution<double>(0, 1)(rng) < acfg.barge_in_prob;
  const double jitter = std::uniform_real_distribution<double>(
      -static_cast<double>(acfg.onset_jitter_ms), static_cast<double>(acfg.onset_jitter_ms))(rng);

  for (std::int64_t f = 0;; ++f) {
    // user stream
    Eigen::VectorXf user_frame;
    bool user_voiced = false;
    if (query_start && f >= *query_start && f < *query_start + q_frames) {
      user_frame = query.row(f - *query_start).transpose();
      user_voiced = is_voiced(q.script, Speaker::User, static_cast<double>(f - *query_start) * period);
    } else {
      user_frame = user_silence();
    }

    // detection
    std::optional<ControlToken> control;
    if (use_model) {
      const std::span<const float> frames[2] = {
          std::span<const float>(user_frame.data(), static_cast<std::size_t>(fcfg.dim)),
          std::span<const float>(system_frame.data(), static_cast<std::size_t>(fcfg.dim))};
      if (query_start && f == *query_start) session->rearm(Speaker::User);
      const auto r = session->step(std::span<const std::span<const float>>(frames, 2), std::nullopt);
      for (const auto& e : r.events) {
        if (e.kind == EndpointKind::SystemEnd && !query_start) query_start = f + 1 + pause;
        if (e.kind == EndpointKind::UserEnd && query_start && f >= *query_start && !trigger) trigger = f;
      }
    } else {
      if (!query_start && f == opening + 1) query_start = f + 1 + pause;
      if (cfg.mode == DuplexMode::Endpointer && query_start && f == *query_start + end_offset) trigger = f;
    }
    if (!query_start && f >= opening + 1 + sys_timeout) {
      query_start = f + 1 + pause;  // detector never saw the opening end
    }
    if (query_start && f == *query_start) {
      out.true_end_frame = *query_start + end_offset;
    }
    if (cfg.mode == DuplexMode::Baseline && query_start && f == *query_start) {
      const auto onset = barge ? std::uniform_int_distribution<std::int64_t>(
                                     *query_start + 1, std::max(*query_start + 1, out.true_end_frame - 1))(rng)
                               : out.true_end_frame + std::llround((static_cast<double>(acfg.onset_delay_ms) + jitter) / period);
      agent.schedule_onset(onset);
    }

    if (cfg.mode == DuplexMode::Endpointer && query_start && f >= *query_start) {
      if (trigger && *trigger == f) {
        control = ControlToken::Unk;
      } else if (!trigger && f >= out.true_end_frame + max_wait) {
        trigger = f;
        out.fallback = true;
        control = ControlToken::Unk;
      } else if (!trigger) {
        control = ControlToken::Pad;
      } else if (unk_pending && agent.state() == AgentState::Listening) {
        control = ControlToken::Unk;  // redeliver once the opening is over
      }
    }

    const auto ignored_before = agent.ignored_unk();
    const auto a = agent.step(control);
    if (control == ControlToken::Unk) unk_pending = agent.ignored_unk() > ignored_before;
    if (a.speech && user_voiced) ++out.overlap_frames;
    system_frame = a.features;
    if (agent.response_onset() && query_start && f >= *query_start) break;
    if (f > 100000) throw std::runtime_error("duplex simulation did not converge for " + q.id);
  }

  out.trigger_frame = trigger;
  const auto onset = *agent.response_onset();
  out.true_end_ms = static_cast<std::int64_t>(std::llround(static_cast<double>(*query_start) * period)) +
                    q.duration_ms();
  out.onset_ms = static_cast<double>(onset) * period;
  out.latency_ms = static_cast<double>(onset - out.true_end_frame) * period;
  out.cutoff = out.latency_ms < 0;
  return out;
}

}  // namespace

DuplexResult run_duplex(const std::vector<Query>& queries, const AgentConfig& agent,
                        const SynthFeatureConfig& features, const DuplexConfig& cfg) {
  agent.validate();
  if (cfg.mode == DuplexMode::Endpointer && cfg.model && cfg.model->config.arch != Arch::TwoStream) {
    throw ConfigError("the duplex endpointer needs a two-stream model");
  }
  if (cfg.model && cfg.model->config.input_dim != features.dim) {
    throw ConfigError("model input dim does not match the feature config");
  }
  if (cfg.pause_ms.min < 0 || cfg.pause_ms.min > cfg.pause_ms.max) throw ConfigError("bad pause range");
  DuplexResult r;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (queries[i].duration_ms() <= 1000) {
      std::fprintf(stderr, "duplex: query %s shorter than 1 s skipped\n", queries[i].id.c_str());
      ++r.skipped;
      continue;
    }
    r.outcomes.push_back(simulate_query(queries[i], i, agent, features, cfg));
  }
  r.summary = summarize(r.outcomes);
  return r;
}

DuplexSummary summarize(const std::vector<DuplexOutcome>& outcomes) {
  DuplexSummary s;
  s.n = outcomes.size();
  std::vector<double> lat;
  std::size_t cut = 0;
  for (const auto& o : outcomes) {
    if (o.cutoff) {
      ++cut;
    } else {
      lat.push_back(o.latency_ms);
    }
    s.fallbacks += o.fallback;
  }
  s.median_latency_ms = nearest_rank(lat, 0.5);
  s.p90_latency_ms = nearest_rank(lat, 0.9);
  s.cutoff_pct = s.n ? 100.0 * static_cast<double>(cut) / static_cast<double>(s.n) : 0.0;
  return s;
}

nlohmann::json duplex_summary_to_json(const DuplexSummary& s, DuplexMode mode) {
  nlohmann::json j = {{"mode", mode == DuplexMode::Baseline ? "baseline" : "endpointer"},
                      {"n_queries", s.n},
                      {"cutoff_pct", s.cutoff_pct},
                      {"fallbacks", s.fallbacks}};
  j["median_latency_ms"] = s.median_latency_ms ? nlohmann::json(*s.median_latency_ms) : nlohmann::json("NA");
  j["p90_latency_ms"] = s.p90_latency_ms ? nlohmann::json(*s.p90_latency_ms) : nlohmann::json("NA");
  return j;
}

std::string duplex_csv(const std::vector<DuplexOutcome>& outcomes) {
  std::string out = "query_id,true_end_ms,onset_ms,latency_ms,cutoff,fallback\n";
  char buf[256];
  for (const auto& o : outcomes) {
    std::snprintf(buf, sizeof buf, "%s,%lld,%.0f,%.0f,%d,%d\n", o.query_id.c_str(),
                  static_cast<long long>(o.true_end_ms), o.onset_ms, o.latency_ms, o.cutoff ? 1 : 0,
                  o.fallback ? 1 : 0);
    out += buf;
  }
  return out;
}

}  // namespace ep
