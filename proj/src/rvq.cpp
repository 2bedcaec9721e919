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

#include "endpointer/rvq.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "endpointer/common.hpp"

namespace ep {

namespace {

using RowMatrixD =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Index of the nearest row of `book` and its squared distance.
std::pair<int, double> nearest(const RowMatrixD& book,
                               const Eigen::Ref<const Eigen::RowVectorXd>& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < book.rows(); ++k) {
    const double d = (book.row(k) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return {best, best_d};
}

RowMatrixD kmeans(const RowMatrixD& data, int k, int iters, Rng& rng) {
  const Eigen::Index n = data.rows();
  RowMatrixD centroids(k, data.cols());

  // k-means++ seeding
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centroids.row(0) = data.row(first(rng));
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    d2[static_cast<std::size_t>(i)] = (data.row(i) - centroids.row(0)).squaredNorm();
  }
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : d2) total += v;
    Eigen::Index chosen = 0;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (Eigen::Index i = 0; i < n; ++i) {
        r -= d2[static_cast<std::size_t>(i)];
        if (r <= 0.0) {
          chosen = i;
          break;
        }
        chosen = i;
      }
    } else {
      chosen = first(rng);
    }
    centroids.row(c) = data.row(chosen);
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(
          d2[static_cast<std::size_t>(i)], (data.row(i) - centroids.row(c)).squaredNorm());
    }
  }

  std::vector<int> assign(static_cast<std::size_t>(n), 0);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
  for (int it = 0; it < iters; ++it) {
    for (Eigen::Index i = 0; i < n; ++i) {
      auto [a, d] = nearest(centroids, data.row(i));
      assign[static_cast<std::size_t>(i)] = a;
      dist[static_cast<std::size_t>(i)] = d;
    }
    RowMatrixD sums = RowMatrixD::Zero(k, data.cols());
    std::vector<Eigen::Index> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += data.row(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // empty cluster: take over the worst-represented point
      Eigen::Index far = 0;
      for (Eigen::Index i = 1; i < n; ++i) {
        if (dist[static_cast<std::size_t>(i)] > dist[static_cast<std::size_t>(far)]) far = i;
      }
      centroids.row(c) = data.row(far);
      dist[static_cast<std::size_t>(far)] = 0.0;
    }
  }
  return centroids;
}

void check_dim(const RvqCodec& codec, std::size_t n) {
  if (static_cast<int>(n) != codec.dim) {
    throw ConfigError("frame dim " + std::to_string(n) + " != codec dim " +
                      std::to_string(codec.dim));
  }
}

}  // namespace

RvqCodec rvq_train(const FeatureMatrix& frames, const RvqTrainOptions& opt) {
  if (opt.num_quantizers < 1 || opt.codebook_size < 1 || opt.iterations < 0) {
    throw ConfigError("rvq_train: need nq >= 1, k >= 1, iters >= 0");
  }
  if (frames.rows() < opt.codebook_size) {
    throw ConfigError("rvq_train: " + std::to_string(frames.rows()) +
                      " frames < codebook size " + std::to_string(opt.codebook_size));
  }
  Rng rng(opt.seed);
  RvqCodec codec;
  codec.num_quantizers = opt.num_quantizers;
  codec.codebook_size = opt.codebook_size;
  codec.dim = static_cast<int>(frames.cols());
  codec.trained_on = opt.trained_on;

  RowMatrixD residual = frames.cast<double>();
  for (int s = 0; s < opt.num_quantizers; ++s) {
    RowMatrixD book = kmeans(residual, opt.codebook_size, opt.iterations, rng);
    codec.codebooks.push_back(book.cast<float>());
    // Residuals are taken against the float codebook that quantize() will use.
    const RowMatrixD used = codec.codebooks.back().cast<double>();
    for (Eigen::Index i = 0; i < residual.rows(); ++i) {
      residual.row(i) -= used.row(nearest(used, residual.row(i)).first);
    }
  }

  // Entropy temperature: mean squared distance to the nearest first-stage code.
  const RowMatrixD first = codec.codebooks[0].cast<double>();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < frames.rows(); ++i) {
    acc += nearest(first, frames.row(i).cast<double>()).second;
  }
  const double t = acc / static_cast<double>(frames.rows());
  codec.entropy_temperature = t > 0.0 ? t : 1.0;
  return codec;
}

RvqCode rvq_quantize(const RvqCodec& codec, std::span<const float> frame) {
  check_dim(codec, frame.size());
  RvqCode out;
  Eigen::RowVectorXd residual =
      Eigen::Map<const Eigen::RowVectorXf>(frame.data(), codec.dim).cast<double>();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(codec.dim);
  for (const auto& book : codec.codebooks) {
    const RowMatrixD b = book.cast<double>();
    const int idx = nearest(b, residual).first;
    out.codes.push_back(idx);
    residual -= b.row(idx);
    sum += b.row(idx);
  }
  out.embedded = sum.transpose().cast<float>();
  return out;
}

double codebook_entropy(const RvqCodec& codec, std::span<const float> frame) {
  check_dim(codec, frame.size());
  if (codec.codebooks.empty()) throw ConfigError("codec has no codebooks");
  const auto& book = codec.codebooks[0];
  const Eigen::RowVectorXd x =
      Eigen::Map<const Eigen::RowVectorXf>(frame.data(), codec.dim).cast<double>();
  Eigen::VectorXd logits(book.rows());
  for (Eigen::Index k = 0; k < book.rows(); ++k) {
    logits[k] = -(book.row(k).cast<double>() - x).squaredNorm() /
                codec.entropy_temperature;
  }
  const double m = logits.maxCoeff();
  const Eigen::VectorXd e = (logits.array() - m).exp();
  const double z = e.sum();
  double h = 0.0;
  for (Eigen::Index k = 0; k < e.size(); ++k) {
    const double p = e[k] / z;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

FeatureSequence rvq_embed(const RvqCodec& codec, const FeatureSequence& seq) {
  FeatureSequence out;
  out.frame_rate_hz = seq.frame_rate_hz;
  for (const auto& s : seq.streams) {
    FeatureMatrix m(s.rows(), codec.dim);
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
      const auto code = rvq_quantize(
          codec, std::span<const float>(s.row(i).data(), static_cast<std::size_t>(s.cols())));
      m.row(i) = code.embedded.transpose();
    }
    out.streams.push_back(std::move(m));
  }
  return out;
}

double rvq_reconstruction_error(const RvqCodec& codec, const FeatureMatrix& frames,
                                int stages) {
  const RvqCodec sub = rvq_truncate(codec, stages);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < frames.rows(); ++i) {
    const auto code = rvq_quantize(
        sub, std::span<const float>(frames.row(i).data(), static_cast<std::size_t>(frames.cols())));
    acc += (frames.row(i).cast<double>() - code.embedded.transpose().cast<double>())
               .squaredNorm();
  }
  return frames.rows() > 0 ? acc / static_cast<double>(frames.rows()) : 0.0;
}

RvqCodec rvq_truncate(const RvqCodec& codec, int stages) {
  if (stages < 1 || stages > codec.num_quantizers) {
    throw ConfigError("stage count out of range");
  }
  RvqCodec sub = codec;
  sub.num_quantizers = stages;
  sub.codebooks.resize(static_cast<std::size_t>(stages));
  return sub;
}

nlohmann::json rvq_to_json(const RvqCodec& c) {
  nlohmann::json books = nlohmann::json::array();
  for (const auto& b : c.codebooks) {
    books.push_back(std::vector<float>(b.data(), b.data() + b.size()));
  }
  return {{"format", "rvq-codec"},
          {"version", 1},
          {"num_quantizers", c.num_quantizers},
          {"codebook_size", c.codebook_size},
          {"dim", c.dim},
          {"trained_on", c.trained_on},
          {"entropy_temperature", c.entropy_temperature},
          {"codebooks", books}};
}

RvqCodec rvq_from_json(const nlohmann::json& j) {
  RvqCodec c;
  try {
    if (j.at("format") != "rvq-codec" || j.at("version") != 1) {
      throw ConfigError("not an rvq codec file (format/version)");
    }
    c.num_quantizers = j.at("num_quantizers").get<int>();
    c.codebook_size = j.at("codebook_size").get<int>();
    c.dim = j.at("dim").get<int>();
    c.trained_on = j.value("trained_on", "");
    c.entropy_temperature = j.at("entropy_temperature").get<double>();
    for (const auto& jb : j.at("codebooks")) {
      auto v = jb.get<std::vector<float>>();
      if (v.size() != static_cast<std::size_t>(c.codebook_size * c.dim)) {
        throw ConfigError("codebook size does not match header");
      }
      c.codebooks.push_back(
          Eigen::Map<FeatureMatrix>(v.data(), c.codebook_size, c.dim));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad codec file: ") + e.what());
  }
  if (static_cast<int>(c.codebooks.size()) != c.num_quantizers) {
    throw ConfigError("codebook count does not match num_quantizers");
  }
  return c;
}

void save_rvq(const std::string& path, const RvqCodec& codec) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << rvq_to_json(codec).dump() << '\n';
}

RvqCodec load_rvq(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return rvq_from_json(j);
}

}  // namespace ep
