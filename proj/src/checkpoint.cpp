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

#include "endpointer/checkpoint.hpp"

#include <map>

#include <nlohmann/json.hpp>

#include "endpointer/bytes.hpp"

namespace ep {

namespace {

void put_tensor(bytes::Writer& w, const std::string& name, const Mat<float>& m) {
  w.u32(static_cast<std::uint32_t>(name.size()));
  w.str(name);
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  w.f32s(std::span<const float>(m.data(), static_cast<std::size_t>(m.size())));
}

}  // namespace

ModelCheckpoint init_model(const ModelConfig& config) {
  ModelCheckpoint c;
  c.config = config;
  c.params = init_params(config);
  return c;
}

std::vector<std::uint8_t> encode_checkpoint(const ModelCheckpoint& ckpt, bool with_adam) {
  check_shapes(ckpt.params, ckpt.config);
  nlohmann::json header = {
      {"config", model_config_to_json(ckpt.config)},
      {"meta",
       {{"epoch", ckpt.meta.epoch},
        {"validation_score", ckpt.meta.validation_score},
        {"delay_tau", ckpt.meta.delay_tau},
        {"feature_provenance", ckpt.meta.feature_provenance},
        {"frame_rate_hz", ckpt.meta.frame_rate_hz}}}};
  const bool adam = with_adam && ckpt.adam.has_value();
  if (adam) header["adam_step"] = ckpt.adam->step;
  const std::string js = header.dump();

  bytes::Writer w;
  w.str("EPCK");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(js.size()));
  w.str(js);
  const std::size_t count_pos = w.size();
  w.u32(0);
  std::uint32_t n = 0;
  ckpt.params.visit([&](const std::string& name, const Mat<float>& m) {
    put_tensor(w, name, m);
    ++n;
  });
  if (adam) {
    ckpt.adam->m.visit([&](const std::string& name, const Mat<float>& m) {
      put_tensor(w, "adam.m." + name, m);
      ++n;
    });
    ckpt.adam->v.visit([&](const std::string& name, const Mat<float>& m) {
      put_tensor(w, "adam.v." + name, m);
      ++n;
    });
  }
  w.patch_u32(count_pos, n);
  return w.take();
}

ModelCheckpoint decode_checkpoint(std::span<const std::uint8_t> data) {
  bytes::Reader r(data);
  if (r.str(4) != "EPCK") throw FormatError("bad magic, expected EPCK", 0);
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  const auto js_off = r.offset();
  const auto js_len = r.u32();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.str(js_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what(), js_off);
  }
  ModelCheckpoint c;
  try {
    c.config = model_config_from_json(header.at("config"));
    const auto& meta = header.at("meta");
    c.meta.epoch = meta.value("epoch", 0);
    c.meta.validation_score = meta.value("validation_score", 0.0);
    c.meta.delay_tau = meta.value("delay_tau", 0);
    c.meta.feature_provenance = meta.value("feature_provenance", "");
    c.meta.frame_rate_hz = meta.value("frame_rate_hz", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint header: ") + e.what(), js_off);
  }

  std::map<std::string, Mat<float>> tensors;
  const auto n = r.u32();
  for (std::uint32_t k = 0; k < n; ++k) {
    const auto name = r.str(r.u32());
    const auto rows = r.u32();
    const auto cols = r.u32();
    const auto off = r.offset();
    if (std::uint64_t{rows} * cols * 4 > r.remaining()) {
      throw FormatError("truncated tensor " + name, off);
    }
    Mat<float> m(rows, cols);
    r.f32s(std::span<float>(m.data(), static_cast<std::size_t>(m.size())));
    tensors.emplace(name, std::move(m));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after tensors", r.offset());

  auto take = [&](const std::string& name) -> Mat<float> {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ConfigError("checkpoint is missing tensor " + name);
    return it->second;
  };
  // Shape the parameter set from the config, then fill it by name.
  c.params = Params<float>::shaped_like(init_params(c.config));
  c.params.visit([&](const std::string& name, Mat<float>& m) { m = take(name); });
  check_shapes(c.params, c.config);
  if (header.contains("adam_step")) {
    AdamState<float> st = adam_init(c.params);
    st.step = header["adam_step"].get<std::int64_t>();
    st.m.visit([&](const std::string& name, Mat<float>& m) { m = take("adam.m." + name); });
    st.v.visit([&](const std::string& name, Mat<float>& m) { m = take("adam.v." + name); });
    c.adam = std::move(st);
  }
  return c;
}

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt, bool with_adam) {
  bytes::write_file(path, encode_checkpoint(ckpt, with_adam));
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(bytes::read_file(path));
}

ModelCheckpoint load_for_finetune(const std::string& path, const ModelConfig& expected) {
  auto c = load_checkpoint(path);
  ModelConfig a = c.config;
  ModelConfig b = expected;
  a.rng_seed = b.rng_seed = 0;
  if (!(a == b)) {
    throw ConfigError("checkpoint config does not match the requested model config");
  }
  return c;
}

}  // namespace ep
