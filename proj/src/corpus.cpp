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

#include "endpointer/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "endpointer/common.hpp"

namespace ep {

namespace {

std::int64_t uniform(Rng& rng, const IntRange& r) {
  return std::uniform_int_distribution<std::int64_t>(r.min, r.max)(rng);
}

void check_range(const IntRange& r, const char* name, std::int64_t floor) {
  if (r.min > r.max) {
    throw ConfigError(std::string("empty range for ") + name + ": min " +
                      std::to_string(r.min) + " > max " + std::to_string(r.max));
  }
  if (r.min < floor) {
    throw ConfigError(std::string(name) + ".min must be >= " +
                      std::to_string(floor));
  }
}

// Splits `voiced` ms into `parts` segments, each at least `min_seg` long, with
// uniformly random cut points.
std::vector<std::int64_t> split_voiced(Rng& rng, std::int64_t voiced,
                                       std::int64_t parts,
                                       std::int64_t min_seg) {
  std::int64_t slack = voiced - parts * min_seg;
  std::vector<std::int64_t> cuts(static_cast<std::size_t>(parts - 1));
  std::uniform_int_distribution<std::int64_t> pick(0, slack);
  for (auto& c : cuts) c = pick(rng);
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::int64_t> segs;
  std::int64_t prev = 0;
  for (auto c : cuts) {
    segs.push_back(min_seg + (c - prev));
    prev = c;
  }
  segs.push_back(min_seg + (slack - prev));
  return segs;
}

const char* speaker_name(Speaker s) {
  return s == Speaker::User ? "user" : "system";
}

Speaker speaker_from_name(const std::string& s) {
  if (s == "user") return Speaker::User;
  if (s == "system") return Speaker::System;
  throw ConfigError("unknown speaker '" + s + "'");
}

IntRange range_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw ConfigError("range must be a two-element array [min,max]");
  }
  return {j[0].get<std::int64_t>(), j[1].get<std::int64_t>()};
}

nlohmann::json range_to_json(const IntRange& r) {
  return nlohmann::json::array({r.min, r.max});
}

}  // namespace

std::int64_t Turn::voiced_ms() const {
  std::int64_t paused = 0;
  for (const auto& p : pauses) paused += p.duration();
  return end_ms - start_ms - paused;
}

void CorpusConfig::validate() const {
  if (n_dialogues <= 0) throw ConfigError("n_dialogues must be positive");
  check_range(turns_per_dialogue, "turns_per_dialogue", 1);
  check_range(turn_duration_ms, "turn_duration_ms", 1);
  check_range(pause_duration_ms, "pause_duration_ms", 1);
  check_range(pauses_per_turn, "pauses_per_turn", 0);
  check_range(gap_ms, "gap_ms", 1);
  if (min_voiced_segment_ms <= 0) {
    throw ConfigError("min_voiced_segment_ms must be positive");
  }
  if ((pauses_per_turn.max + 1) * min_voiced_segment_ms > turn_duration_ms.min) {
    throw ConfigError(
        "turn_duration_ms.min too short to hold pauses_per_turn.max pauses");
  }
  if (split_train < 0 || split_valid < 0 || split_test < 0 ||
      split_train + split_valid + split_test <= 0) {
    throw ConfigError("split ratios must be non-negative with a positive sum");
  }
}

std::vector<DialogueScript> Corpus::all() const {
  std::vector<DialogueScript> out = train;
  out.insert(out.end(), valid.begin(), valid.end());
  out.insert(out.end(), test.begin(), test.end());
  return out;
}

DialogueScript generate_dialogue(const CorpusConfig& cfg, std::uint64_t index) {
  Rng rng(derive_seed(cfg.rng_seed, index));
  DialogueScript d;
  char id[32];
  std::snprintf(id, sizeof(id), "d%05llu", static_cast<unsigned long long>(index));
  d.dialogue_id = id;

  const std::int64_t n_turns = uniform(rng, cfg.turns_per_dialogue);
  std::int64_t t = uniform(rng, cfg.gap_ms);  // leading silence
  for (std::int64_t k = 0; k < n_turns; ++k) {
    Turn turn;
    turn.speaker = (k % 2 == 0) ? Speaker::User : Speaker::System;
    turn.start_ms = t;
    const std::int64_t voiced = uniform(rng, cfg.turn_duration_ms);
    const std::int64_t n_pauses = uniform(rng, cfg.pauses_per_turn);
    auto segs = split_voiced(rng, voiced, n_pauses + 1, cfg.min_voiced_segment_ms);
    std::int64_t cursor = t;
    for (std::int64_t p = 0; p < n_pauses; ++p) {
      cursor += segs[static_cast<std::size_t>(p)];
      const std::int64_t len = uniform(rng, cfg.pause_duration_ms);
      turn.pauses.push_back({cursor, cursor + len});
      cursor += len;
    }
    cursor += segs.back();
    turn.end_ms = cursor;
    t = cursor + uniform(rng, cfg.gap_ms);  // gap, or trailing silence
    d.turns.push_back(std::move(turn));
  }
  d.total_duration_ms = t;
  return d;
}

Corpus generate_corpus(const CorpusConfig& cfg) {
  cfg.validate();
  const double total = cfg.split_train + cfg.split_valid + cfg.split_test;
  const auto n = cfg.n_dialogues;
  const auto n_train = static_cast<std::int64_t>(
      std::floor(static_cast<double>(n) * cfg.split_train / total + 1e-9));
  const auto n_valid = static_cast<std::int64_t>(
      std::floor(static_cast<double>(n) * cfg.split_valid / total + 1e-9));
  Corpus c;
  for (std::int64_t i = 0; i < n; ++i) {
    auto d = generate_dialogue(cfg, static_cast<std::uint64_t>(i));
    if (i < n_train) {
      c.train.push_back(std::move(d));
    } else if (i < n_train + n_valid) {
      c.valid.push_back(std::move(d));
    } else {
      c.test.push_back(std::move(d));
    }
  }
  return c;
}

void check_script(const DialogueScript& s) {
  auto fail = [&](const std::string& why) {
    throw ConfigError("script " + s.dialogue_id + ": " + why);
  };
  for (std::size_t i = 0; i < s.turns.size(); ++i) {
    const Turn& t = s.turns[i];
    if (t.start_ms >= t.end_ms) fail("turn with start >= end");
    if (i > 0) {
      const Turn& prev = s.turns[i - 1];
      if (t.start_ms < prev.end_ms) fail("overlapping turns");
      if (t.speaker == prev.speaker) fail("speakers do not alternate");
    }
    std::int64_t floor = t.start_ms;
    for (const auto& p : t.pauses) {
      if (p.start_ms <= floor || p.end_ms <= p.start_ms || p.end_ms >= t.end_ms) {
        fail("pause outside its turn or not sorted/disjoint");
      }
      floor = p.end_ms;
    }
  }
  if (!s.turns.empty() && s.total_duration_ms < s.turns.back().end_ms) {
    fail("total_duration_ms shorter than last turn");
  }
}

void Histogram::add(std::int64_t value) {
  const std::int64_t edge =
      (value >= 0 ? value / bin_width : -((-value + bin_width - 1) / bin_width)) *
      bin_width;
  ++bins[edge];
  ++count;
  mean += (static_cast<double>(value) - mean) / static_cast<double>(count);
}

ScriptStats script_stats(const std::vector<DialogueScript>& scripts) {
  if (scripts.empty()) throw ConfigError("script_stats: empty script list");
  ScriptStats st;
  st.n_dialogues = static_cast<std::int64_t>(scripts.size());
  for (const auto& s : scripts) {
    st.turns_per_dialogue.add(static_cast<std::int64_t>(s.turns.size()));
    for (std::size_t i = 0; i < s.turns.size(); ++i) {
      const Turn& t = s.turns[i];
      ++st.n_turns;
      if (t.speaker == Speaker::User) ++st.n_user_turns;
      st.voiced_ms.add(t.voiced_ms());
      st.pauses_per_turn.add(static_cast<std::int64_t>(t.pauses.size()));
      for (const auto& p : t.pauses) st.pause_ms.add(p.duration());
      if (i + 1 < s.turns.size()) {
        st.gap_ms.add(s.turns[i + 1].start_ms - t.end_ms);
      }
    }
  }
  return st;
}

nlohmann::json scripts_to_json(const std::vector<DialogueScript>& scripts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : scripts) {
    nlohmann::json turns = nlohmann::json::array();
    for (const auto& t : s.turns) {
      nlohmann::json pauses = nlohmann::json::array();
      for (const auto& p : t.pauses) pauses.push_back({p.start_ms, p.end_ms});
      turns.push_back({{"speaker", speaker_name(t.speaker)},
                       {"start_ms", t.start_ms},
                       {"end_ms", t.end_ms},
                       {"pauses", pauses}});
    }
    arr.push_back({{"id", s.dialogue_id},
                   {"total_duration_ms", s.total_duration_ms},
                   {"turns", turns}});
  }
  return {{"dialogues", arr}};
}

std::vector<DialogueScript> scripts_from_json(const nlohmann::json& doc) {
  std::vector<DialogueScript> out;
  try {
    for (const auto& jd : doc.at("dialogues")) {
      DialogueScript s;
      s.dialogue_id = jd.at("id").get<std::string>();
      for (const auto& jt : jd.at("turns")) {
        Turn t;
        t.speaker = speaker_from_name(jt.at("speaker").get<std::string>());
        t.start_ms = jt.at("start_ms").get<std::int64_t>();
        t.end_ms = jt.at("end_ms").get<std::int64_t>();
        for (const auto& jp : jt.value("pauses", nlohmann::json::array())) {
          t.pauses.push_back({jp.at(0).get<std::int64_t>(),
                              jp.at(1).get<std::int64_t>()});
        }
        s.turns.push_back(std::move(t));
      }
      // total_duration_ms is optional in hand-written files
      s.total_duration_ms = jd.value(
          "total_duration_ms", s.turns.empty() ? 0 : s.turns.back().end_ms);
      check_script(s);
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad script JSON: ") + e.what());
  }
  return out;
}

void write_scripts(const std::string& path,
                   const std::vector<DialogueScript>& scripts) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << scripts_to_json(scripts).dump() << '\n';
}

std::vector<DialogueScript> read_scripts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return scripts_from_json(doc);
}

CorpusConfig corpus_config_from_json(const nlohmann::json& j) {
  CorpusConfig c;
  try {
    c.n_dialogues = j.value("n_dialogues", c.n_dialogues);
    if (j.contains("turns_per_dialogue"))
      c.turns_per_dialogue = range_from_json(j["turns_per_dialogue"]);
    if (j.contains("turn_duration_ms"))
      c.turn_duration_ms = range_from_json(j["turn_duration_ms"]);
    if (j.contains("pause_duration_ms"))
      c.pause_duration_ms = range_from_json(j["pause_duration_ms"]);
    if (j.contains("pauses_per_turn"))
      c.pauses_per_turn = range_from_json(j["pauses_per_turn"]);
    if (j.contains("gap_ms")) c.gap_ms = range_from_json(j["gap_ms"]);
    c.min_voiced_segment_ms =
        j.value("min_voiced_segment_ms", c.min_voiced_segment_ms);
    if (j.contains("split")) {
      const auto& s = j["split"];
      c.split_train = s.at(0).get<double>();
      c.split_valid = s.at(1).get<double>();
      c.split_test = s.at(2).get<double>();
    }
    c.rng_seed = j.value("rng_seed", c.rng_seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad corpus config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json corpus_config_to_json(const CorpusConfig& c) {
  return {{"n_dialogues", c.n_dialogues},
          {"turns_per_dialogue", range_to_json(c.turns_per_dialogue)},
          {"turn_duration_ms", range_to_json(c.turn_duration_ms)},
          {"pause_duration_ms", range_to_json(c.pause_duration_ms)},
          {"pauses_per_turn", range_to_json(c.pauses_per_turn)},
          {"gap_ms", range_to_json(c.gap_ms)},
          {"min_voiced_segment_ms", c.min_voiced_segment_ms},
          {"split", {c.split_train, c.split_valid, c.split_test}},
          {"rng_seed", c.rng_seed}};
}

nlohmann::json stats_to_json(const ScriptStats& st) {
  auto hist = [](const Histogram& h) {
    nlohmann::json bins = nlohmann::json::object();
    for (const auto& [edge, n] : h.bins) bins[std::to_string(edge)] = n;
    return nlohmann::json{{"count", h.count},
                          {"mean", h.mean},
                          {"bin_width", h.bin_width},
                          {"bins", bins}};
  };
  return {{"n_dialogues", st.n_dialogues},
          {"n_turns", st.n_turns},
          {"n_user_turns", st.n_user_turns},
          {"turns_per_dialogue", hist(st.turns_per_dialogue)},
          {"voiced_ms", hist(st.voiced_ms)},
          {"pauses_per_turn", hist(st.pauses_per_turn)},
          {"pause_ms", hist(st.pause_ms)},
          {"gap_ms", hist(st.gap_ms)}};
}

}  // namespace ep
