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

// Command-line front end for the endpointing toolkit.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "endpointer/audio.hpp"
#include "endpointer/bytes.hpp"
#include "endpointer/checkpoint.hpp"
#include "endpointer/common.hpp"
#include "endpointer/corpus.hpp"
#include "endpointer/dataset.hpp"
#include "endpointer/detector.hpp"
#include "endpointer/duplex.hpp"
#include "endpointer/eval.hpp"
#include "endpointer/feature_io.hpp"
#include "endpointer/features.hpp"
#include "endpointer/rvq.hpp"
#include "endpointer/server.hpp"
#include "endpointer/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ep {
namespace {

// Thrown for bad command-line usage that CLI11 cannot catch itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Settings shared by every subcommand: a JSON config file with optional
// sections, overridden by flags.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  json config = json::object();

  json section(const char* name) const {
    return config.contains(name) ? config.at(name) : json::object();
  }
};

void load_config(Common& c) {
  if (c.config_path.empty()) return;
  std::ifstream in(c.config_path);
  if (!in) throw ConfigError("cannot open config " + c.config_path);
  try {
    c.config = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + c.config_path + " is not valid JSON: " + e.what());
  }
  if (!c.config.is_object()) throw ConfigError("config root must be an object");
}

CorpusConfig corpus_cfg(const Common& c) {
  auto cfg = corpus_config_from_json(c.section("corpus"));
  if (c.seed) cfg.rng_seed = *c.seed;
  return cfg;
}

SynthFeatureConfig synth_cfg(const Common& c) {
  auto cfg = synth_config_from_json(c.section("features"));
  if (c.seed) cfg.rng_seed = *c.seed;
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

std::vector<DialogueScript> split_of(const Corpus& corpus, const std::string& split) {
  if (split == "train") return corpus.train;
  if (split == "valid") return corpus.valid;
  if (split == "test") return corpus.test;
  if (split == "all") return corpus.all();
  throw ConfigError("unknown split '" + split + "'");
}

StreamMode stream_mode(const std::string& s) {
  if (s == "mono") return StreamMode::Mono;
  if (s == "two") return StreamMode::TwoStream;
  throw ConfigError("stream mode must be mono or two, got '" + s + "'");
}

// ---------------------------------------------------------------- commands

struct GenCorpus {
  std::string out = "corpus.json";
  std::string stats;
  void run(const Common& c) {
    const auto cfg = corpus_cfg(c);
    const auto corpus = generate_corpus(cfg);
    json doc = scripts_to_json(corpus.all());
    doc["config"] = corpus_config_to_json(cfg);
    doc["split"] = {{"train", corpus.train.size()}, {"valid", corpus.valid.size()}, {"test", corpus.test.size()}};
    write_json(out, doc);
    if (!stats.empty()) write_json(stats, stats_to_json(script_stats(corpus.all())));
    std::cerr << "gen-corpus: " << corpus.train.size() << "/" << corpus.valid.size() << "/"
              << corpus.test.size() << " dialogues -> " << out << "\n";
  }
};

// Splits come from the generator config, so a corpus file written by
// gen-corpus is regenerated identically from its embedded config.
Corpus load_corpus(const Common& c, const std::string& path) {
  if (path.empty()) return generate_corpus(corpus_cfg(c));
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open corpus " + path);
  const json doc = json::parse(in);
  const auto scripts = scripts_from_json(doc);
  if (!doc.contains("split")) {
    Corpus all;
    all.test = scripts;
    return all;
  }
  const auto n_train = doc["split"].value("train", std::size_t{0});
  const auto n_valid = doc["split"].value("valid", std::size_t{0});
  if (n_train + n_valid > scripts.size()) throw ConfigError("corpus split exceeds its dialogues");
  Corpus corpus;
  corpus.train.assign(scripts.begin(), scripts.begin() + static_cast<long>(n_train));
  corpus.valid.assign(scripts.begin() + static_cast<long>(n_train),
                      scripts.begin() + static_cast<long>(n_train + n_valid));
  corpus.test.assign(scripts.begin() + static_cast<long>(n_train + n_valid), scripts.end());
  return corpus;
}

struct ExtractFeatures {
  std::string corpus;
  std::string mode = "mono";
  std::string out = "features";
  std::string codec;
  int downsample = 1;
  std::vector<std::string> wavs;
  void run(const Common& c) {
    std::optional<RvqCodec> rvq;
    if (!codec.empty()) rvq = load_rvq(codec);
    auto post = [&](FeatureSequence seq) {
      if (rvq) seq = rvq_embed(*rvq, seq);
      if (downsample != 1) seq = causal_downsample(seq, downsample);
      return seq;
    };
    if (!wavs.empty()) {
      fs::create_directories(out);
      for (const auto& w : wavs) {
        const auto wav = read_wav(w);
        LogMelConfig lm;
        if (wav.sample_rate != lm.sample_rate) {
          throw ConfigError(w + " is sampled at " + std::to_string(wav.sample_rate) + " Hz, expected " +
                            std::to_string(lm.sample_rate));
        }
        const auto seq = post(logmel(wav.samples, lm));
        const auto dst = (fs::path(out) / (fs::path(w).stem().string() + ".epf1")).string();
        write_epf1(dst, seq);
        std::cerr << "extract-features: " << w << " -> " << dst << " (" << seq.num_frames() << " frames)\n";
      }
      return;
    }
    const auto cfg = synth_cfg(c);
    const auto corp = load_corpus(c, corpus);
    const auto m = stream_mode(mode);
    write_dir_scripts(out, corp.all());
    for (const char* split : {"train", "valid", "test"}) {
      const auto scripts = split_of(corp, split);
      std::vector<LabeledDialogue> ds;
      for (const auto& s : scripts) ds.push_back(label_dialogue(s, post(render_features(s, cfg, m))));
      write_split(out, split, ds);
      std::cerr << "extract-features: " << split << " " << ds.size() << " dialogues\n";
    }
    write_json((fs::path(out) / "features.json").string(),
               {{"features", synth_config_to_json(cfg)}, {"mode", mode}, {"codec", codec}, {"downsample", downsample}});
  }
};

struct TrainRvq {
  std::string features = "features";
  std::string split = "train";
  std::string out = "codec.json";
  RvqTrainOptions opt;
  void run(const Common& c) {
    const auto s = c.section("rvq");
    opt.num_quantizers = s.value("num_quantizers", opt.num_quantizers);
    opt.codebook_size = s.value("codebook_size", opt.codebook_size);
    opt.iterations = s.value("iterations", opt.iterations);
    opt.seed = s.value("seed", opt.seed);
    if (c.seed) opt.seed = *c.seed;
    const auto ds = read_split(features, split);
    Eigen::Index rows = 0;
    for (const auto& d : ds) rows += static_cast<Eigen::Index>(d.num_frames() * d.features.n_streams());
    FeatureMatrix all(rows, static_cast<Eigen::Index>(ds.front().features.dim()));
    Eigen::Index r = 0;
    for (const auto& d : ds) {
      for (const auto& m : d.features.streams) {
        all.middleRows(r, m.rows()) = m;
        r += m.rows();
      }
    }
    if (opt.trained_on.empty()) opt.trained_on = features + "/" + split;
    const auto codec = rvq_train(all, opt);
    save_rvq(out, codec);
    std::cerr << "train-rvq: nq " << codec.num_quantizers << " k " << codec.codebook_size << " on "
              << all.rows() << " frames, mse " << rvq_reconstruction_error(codec, all, codec.num_quantizers)
              << " -> " << out << "\n";
  }
};

struct Entropy {
  std::string codec;
  std::string features = "features";
  std::string split = "test";
  std::string plot_csv;
  std::string out;
  void run(const Common&) {
    const auto rvq = load_rvq(codec);
    const auto ds = read_split(features, split);
    std::string csv = "dialogue_id,frame,time_ms,entropy,silence\n";
    double sum[2] = {0, 0};
    std::size_t n[2] = {0, 0};
    for (const auto& d : ds) {
      const double period = frame_period_ms(d.features.frame_rate_hz);
      const auto& m = d.features.streams[0];
      for (Eigen::Index t = 0; t < m.rows(); ++t) {
        const double ms = static_cast<double>(t) * period;
        const bool silent = !is_voiced(d.script, Speaker::User, ms) && !is_voiced(d.script, Speaker::System, ms);
        const Eigen::RowVectorXf row = m.row(t);
        const double h = codebook_entropy(rvq, std::span<const float>(row.data(), static_cast<std::size_t>(row.size())));
        sum[silent] += h;
        ++n[silent];
        if (!plot_csv.empty()) {
          char buf[160];
          std::snprintf(buf, sizeof buf, "%s,%lld,%.1f,%.6f,%d\n", d.script.dialogue_id.c_str(),
                        static_cast<long long>(t), ms, h, silent ? 1 : 0);
          csv += buf;
        }
      }
    }
    if (!plot_csv.empty()) write_text(plot_csv, csv);
    json summary = {{"frames_speech", n[0]},
                    {"frames_silence", n[1]},
                    {"mean_entropy_speech", n[0] ? sum[0] / static_cast<double>(n[0]) : 0.0},
                    {"mean_entropy_silence", n[1] ? sum[1] / static_cast<double>(n[1]) : 0.0},
                    {"ln_k", std::log(static_cast<double>(rvq.codebook_size))}};
    write_json(out, summary);
  }
};

ModelConfig model_cfg(const Common& c, const std::string& arch, int input_dim) {
  auto j = c.section("model");
  ModelConfig cfg = j.empty() ? ModelConfig{} : model_config_from_json(j);
  if (!arch.empty()) cfg.arch = arch_from_name(arch);
  if (!j.contains("input_dim")) cfg.input_dim = input_dim;
  if (c.seed) cfg.rng_seed = *c.seed;
  cfg.validate();
  return cfg;
}

struct Train {
  std::string features = "features";
  std::string out = "model.epck";
  std::string arch;
  std::optional<int> tau, epochs, batch;
  std::optional<double> lr;
  std::string init;
  std::string log;
  void run(const Common& c) {
    auto tc = train_config_from_json(c.section("train"));
    if (tau) tc.delay_tau = *tau;
    if (epochs) tc.epochs = *epochs;
    if (batch) tc.batch_size = *batch;
    if (lr) tc.lr = *lr;
    if (c.seed) tc.seed = *c.seed;
    tc.validate();
    const auto tr = read_split(features, "train");
    const auto va = read_split(features, "valid");
    const auto mc = model_cfg(c, arch, static_cast<int>(tr.front().features.dim()));
    if (static_cast<int>(tr.front().features.n_streams()) != mc.n_streams()) {
      throw ConfigError(std::string(arch_name(mc.arch)) + "-stream model needs " +
                        std::to_string(mc.n_streams()) + " feature streams, found " +
                        std::to_string(tr.front().features.n_streams()));
    }
    ModelCheckpoint start = init.empty() ? init_model(mc) : load_for_finetune(init, mc);
    start.meta.feature_provenance = features;
    std::string log_lines;
    const auto result = train(tr, va, std::move(start), tc, [&](const EpochLog& l) {
      const auto line = epoch_log_to_json(l).dump();
      std::cerr << "train: " << line << "\n";
      log_lines += line + "\n";
    });
    save_checkpoint(out, result.best);
    save_checkpoint(out + ".last", result.last, true);
    if (!log.empty()) write_text(log, log_lines);
    std::cerr << "train: best epoch " << result.best.meta.epoch << " score "
              << result.best.meta.validation_score << " -> " << out << "\n";
  }
};

struct EvalCmd {
  std::string ckpt;
  std::string features = "features";
  std::string split = "test";
  double threshold = 0.9;
  std::string out;
  std::string turns;
  void run(const Common&) {
    const auto model = load_checkpoint(ckpt);
    const auto ds = read_split(features, split);
    const auto probs = forward_many(model.params, model.config, ds);
    std::vector<TurnOutcome> all;
    for (std::size_t k = 0; k < ds.size(); ++k) {
      auto o = evaluate_turns(probs[k], ds[k].script, ds[k].features.frame_rate_hz, threshold);
      all.insert(all.end(), o.begin(), o.end());
    }
    write_text(out, metrics_csv({aggregate(all, threshold)}));
    if (!turns.empty()) {
      std::string csv = "dialogue_id,turn_index,true_end_ms,trigger_ms,latency_ms,class\n";
      for (const auto& o : all) {
        csv += o.dialogue_id + "," + std::to_string(o.turn_index) + "," + std::to_string(o.true_end_ms) + "," +
               (o.trigger_frame ? std::to_string(static_cast<long long>(o.trigger_ms)) : "NA") + "," +
               (o.trigger_frame ? std::to_string(static_cast<long long>(o.latency_ms)) : "NA") + "," +
               turn_class_name(o.kind) + "\n";
      }
      write_text(turns, csv);
    }
  }
};

struct SweepCmd {
  std::string ckpt;
  std::string features = "features";
  std::string split = "test";
  std::string grid = "0.70:0.99:0.01";
  std::string out;
  std::string curve;
  std::string operating;
  void run(const Common&) {
    const auto model = load_checkpoint(ckpt);
    const auto ds = read_split(features, split);
    const auto probs = forward_many(model.params, model.config, ds);
    std::vector<DialogueScript> scripts;
    for (const auto& d : ds) scripts.push_back(d.script);
    const auto rows = sweep(probs, scripts, ds.front().features.frame_rate_hz, parse_grid(grid));
    write_text(out, metrics_csv(rows));
    if (!curve.empty()) write_text(curve, curve_csv(rows));
    if (!operating.empty()) {
      json ops = json::array();
      for (double target : {120.0, 160.0}) {
        const auto op = operating_point(rows, target);
        ops.push_back({{"target_ep50_ms", target}, {"row", op ? metrics_row_to_json(*op) : json(nullptr)}});
      }
      write_json(operating, ops);
    }
  }
};

struct ErrorBins {
  std::string ckpt;
  std::string features = "features";
  std::string split = "test";
  double threshold = 0.9;
  std::string out;
  void run(const Common&) {
    const auto model = load_checkpoint(ckpt);
    const auto ds = read_split(features, split);
    const auto probs = forward_many(model.params, model.config, ds);
    std::vector<TurnOutcome> all;
    std::vector<DialogueScript> scripts;
    for (std::size_t k = 0; k < ds.size(); ++k) {
      auto o = evaluate_turns(probs[k], ds[k].script, ds[k].features.frame_rate_hz, threshold);
      all.insert(all.end(), o.begin(), o.end());
      scripts.push_back(ds[k].script);
    }
    write_text(out, cutoff_bins_csv(cutoff_error_bins(all, scripts)));
  }
};

struct SimulateDuplex {
  std::string mode = "baseline";
  std::string ckpt;
  std::optional<double> threshold;
  std::size_t n = 700;
  bool oracle = false;
  std::string out_json;
  std::string out_csv;
  void run(const Common& c) {
    const auto sd = c.section("duplex");
    DuplexConfig dc;
    dc.threshold = sd.value("threshold", dc.threshold);
    dc.max_wait_ms = sd.value("max_wait_ms", dc.max_wait_ms);
    dc.seed = sd.value("seed", dc.seed);
    if (threshold) dc.threshold = *threshold;
    if (c.seed) dc.seed = *c.seed;
    if (mode == "baseline") {
      dc.mode = DuplexMode::Baseline;
    } else if (mode == "endpointer") {
      dc.mode = DuplexMode::Endpointer;
      if (!oracle) {
        if (ckpt.empty()) throw ConfigError("endpointer mode needs --ckpt (or --oracle)");
        dc.model = std::make_shared<ModelCheckpoint>(load_checkpoint(ckpt));
      }
    } else {
      throw ConfigError("mode must be baseline or endpointer");
    }
    const auto sa = c.section("agent");
    AgentConfig ac;
    ac.barge_in_prob = sa.value("barge_in_prob", ac.barge_in_prob);
    ac.onset_delay_ms = sa.value("onset_delay_ms", ac.onset_delay_ms);
    ac.onset_jitter_ms = sa.value("onset_jitter_ms", ac.onset_jitter_ms);
    ac.rng_seed = sa.value("rng_seed", ac.rng_seed);
    if (c.seed) ac.rng_seed = *c.seed;
    const auto queries = make_queries(corpus_cfg(c), n);
    const auto r = run_duplex(queries, ac, synth_cfg(c), dc);
    auto summary = duplex_summary_to_json(r.summary, dc.mode);
    summary["skipped"] = r.skipped;
    write_json(out_json, summary);
    if (!out_csv.empty()) write_text(out_csv, duplex_csv(r.outcomes));
  }
};

volatile std::sig_atomic_t g_stop = 0;

struct Serve {
  std::string ckpt;
  std::optional<double> threshold;
  std::string bind;
  bool system_end = false;
  void run(const Common& c) {
    const auto ss = c.section("serve");
    ServerConfig sc;
    sc.bind = ss.value("bind", sc.bind);
    sc.threshold = ss.value("threshold", sc.threshold);
    sc.detect_system_end = ss.value("detect_system_end", sc.detect_system_end);
    if (!bind.empty()) sc.bind = bind;
    if (threshold) sc.threshold = *threshold;
    if (system_end) sc.detect_system_end = true;
    sc.bind = resolve_bind(sc.bind);
    Server server(std::make_shared<ModelCheckpoint>(load_checkpoint(ckpt)), sc);
    std::signal(SIGINT, [](int) { g_stop = 1; });
    std::signal(SIGTERM, [](int) { g_stop = 1; });
    server.start();
    std::cout << "listening " << server.port() << std::endl;
    while (!g_stop) ::pause();
    server.stop();
  }
};

std::string json_escape(const std::string& s) { return json(s).dump(); }

void report(const char* kind, const std::string& msg) {
  std::cerr << "error kind=" << kind << " message=" << json_escape(msg) << "\n";
}

}  // namespace
}  // namespace ep

int main(int argc, char** argv) {
  using namespace ep;
  CLI::App app{"Streaming speech endpointing toolkit"};
  app.require_subcommand(1);
  Common common;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON config file");
    sub->add_option("--seed", seed, "Seed for every random number consumer");
  };

  GenCorpus gen;
  auto* c_gen = app.add_subcommand("gen-corpus", "Generate a synthetic dialogue corpus");
  add_common(c_gen);
  c_gen->add_option("--out", gen.out, "Corpus JSON output");
  c_gen->add_option("--stats", gen.stats, "Corpus statistics JSON output");

  ExtractFeatures ext;
  auto* c_ext = app.add_subcommand("extract-features", "Render or extract feature files");
  add_common(c_ext);
  c_ext->add_option("--corpus", ext.corpus, "Corpus JSON (default: generate from config)");
  c_ext->add_option("--mode", ext.mode, "mono|two");
  c_ext->add_option("--out", ext.out, "Output directory");
  c_ext->add_option("--codec", ext.codec, "Replace frames by their RVQ reconstruction");
  c_ext->add_option("--downsample", ext.downsample, "Causal downsampling factor");
  c_ext->add_option("--wav", ext.wavs, "8 kHz WAV files to turn into log-mel features");

  TrainRvq trq;
  auto* c_trq = app.add_subcommand("train-rvq", "Train a residual vector quantizer");
  add_common(c_trq);
  c_trq->add_option("--features", trq.features, "Feature directory");
  c_trq->add_option("--split", trq.split, "Split to train on");
  c_trq->add_option("--nq", trq.opt.num_quantizers, "Number of quantizer stages");
  c_trq->add_option("--k", trq.opt.codebook_size, "Codebook size per stage");
  c_trq->add_option("--iters", trq.opt.iterations, "Lloyd iterations per stage");
  c_trq->add_option("--out", trq.out, "Codec JSON output");

  Entropy ent;
  auto* c_ent = app.add_subcommand("entropy", "Per-frame codebook entropy");
  add_common(c_ent);
  c_ent->add_option("--codec", ent.codec, "Codec JSON")->required();
  c_ent->add_option("--features", ent.features, "Feature directory");
  c_ent->add_option("--split", ent.split, "Split to analyse");
  c_ent->add_option("--plot-csv", ent.plot_csv, "Per-frame entropy CSV");
  c_ent->add_option("--out", ent.out, "Summary JSON (default stdout)");

  Train tr;
  auto* c_tr = app.add_subcommand("train", "Train an endpointer");
  add_common(c_tr);
  c_tr->add_option("--features", tr.features, "Feature directory with train/ and valid/");
  c_tr->add_option("--arch", tr.arch, "single|two");
  c_tr->add_option("--tau", tr.tau, "Label delay in frames");
  c_tr->add_option("--epochs", tr.epochs, "Training epochs");
  c_tr->add_option("--batch", tr.batch, "Windows per batch");
  c_tr->add_option("--lr", tr.lr, "Adam learning rate");
  c_tr->add_option("--init", tr.init, "Checkpoint to fine-tune from");
  c_tr->add_option("--log", tr.log, "Per-epoch JSON lines log");
  c_tr->add_option("--out", tr.out, "Best checkpoint output");

  EvalCmd ev;
  auto* c_ev = app.add_subcommand("eval", "Endpoint metrics at one threshold");
  add_common(c_ev);
  c_ev->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  c_ev->add_option("--features", ev.features, "Feature directory");
  c_ev->add_option("--split", ev.split, "Split to evaluate");
  c_ev->add_option("--threshold", ev.threshold, "Decision threshold");
  c_ev->add_option("--out", ev.out, "Report CSV (default stdout)");
  c_ev->add_option("--turns", ev.turns, "Per-turn outcome CSV");

  SweepCmd sw;
  auto* c_sw = app.add_subcommand("sweep", "Threshold sweep");
  add_common(c_sw);
  c_sw->add_option("--ckpt", sw.ckpt, "Checkpoint")->required();
  c_sw->add_option("--features", sw.features, "Feature directory");
  c_sw->add_option("--split", sw.split, "Split to evaluate");
  c_sw->add_option("--grid", sw.grid, "lo:hi:step");
  c_sw->add_option("--out", sw.out, "Report CSV (default stdout)");
  c_sw->add_option("--curve", sw.curve, "Plotting CSV");
  c_sw->add_option("--operating-points", sw.operating, "Fixed-ep50 operating points JSON");

  ErrorBins eb;
  auto* c_eb = app.add_subcommand("error-bins", "Cutoff errors by mid-silence duration");
  add_common(c_eb);
  c_eb->add_option("--ckpt", eb.ckpt, "Checkpoint")->required();
  c_eb->add_option("--features", eb.features, "Feature directory");
  c_eb->add_option("--split", eb.split, "Split to evaluate");
  c_eb->add_option("--threshold", eb.threshold, "Decision threshold");
  c_eb->add_option("--out", eb.out, "Bins CSV (default stdout)");

  SimulateDuplex sd;
  auto* c_sd = app.add_subcommand("simulate-duplex", "Duplex agent simulation");
  add_common(c_sd);
  c_sd->add_option("--mode", sd.mode, "baseline|endpointer");
  c_sd->add_option("--ckpt", sd.ckpt, "Two-stream checkpoint");
  c_sd->add_option("--threshold", sd.threshold, "Decision threshold");
  c_sd->add_option("--n", sd.n, "Number of queries");
  c_sd->add_flag("--oracle", sd.oracle, "Use an oracle detector in endpointer mode");
  c_sd->add_option("--out-json", sd.out_json, "Summary JSON (default stdout)");
  c_sd->add_option("--out-csv", sd.out_csv, "Per-query CSV");

  Serve sv;
  auto* c_sv = app.add_subcommand("serve", "Streaming detector service");
  add_common(c_sv);
  c_sv->add_option("--ckpt", sv.ckpt, "Checkpoint")->required();
  c_sv->add_option("--threshold", sv.threshold, "Decision threshold");
  c_sv->add_option("--bind", sv.bind, std::string("host:port (overridden by ") + kBindEnvVar + ")");
  c_sv->add_flag("--system-end", sv.system_end, "Also report system turn ends");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report("usage", e.what());
    return 2;
  }

  try {
    for (auto* sub : app.get_subcommands()) {
      if (sub->count("--seed")) common.seed = seed;
    }
    load_config(common);
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "gen-corpus") gen.run(common);
    else if (name == "extract-features") ext.run(common);
    else if (name == "train-rvq") trq.run(common);
    else if (name == "entropy") ent.run(common);
    else if (name == "train") tr.run(common);
    else if (name == "eval") ev.run(common);
    else if (name == "sweep") sw.run(common);
    else if (name == "error-bins") eb.run(common);
    else if (name == "simulate-duplex") sd.run(common);
    else if (name == "serve") sv.run(common);
  } catch (const ConfigError& e) {
    report("config", e.what());
    return 3;
  } catch (const FormatError& e) {
    report("format", e.what());
    return 4;
  } catch (const nlohmann::json::exception& e) {
    report("config", e.what());
    return 3;
  } catch (const std::exception& e) {
    report("runtime", e.what());
    return 1;
  }
  return 0;
}
