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
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "endpointer/features.hpp"

namespace ep {

// Residual vector quantizer: stage s quantizes what stages < s left over.
struct RvqCodec {
  int num_quantizers = 0;
  int codebook_size = 0;
  int dim = 0;
  std::vector<FeatureMatrix> codebooks;  // num_quantizers x (K x D)
  std::string trained_on;
  double entropy_temperature = 1.0;
};

struct RvqTrainOptions {
  int num_quantizers = 4;
  int codebook_size = 16;
  int iterations = 25;
  std::uint64_t seed = 11;
  std::string trained_on;
};

// Lloyd k-means per stage with k-means++ seeding. An emptied centroid is moved
// onto the point farthest from its assigned centroid.
RvqCodec rvq_train(const FeatureMatrix& frames, const RvqTrainOptions& opt);

struct RvqCode {
  std::vector<int> codes;
  Eigen::VectorXf embedded;
};

// Greedy stage-wise nearest neighbour; ties go to the lowest index.
RvqCode rvq_quantize(const RvqCodec& codec, std::span<const float> frame);

// Entropy (nats) of softmax(-d^2 / T) over the first-stage codebook.
double codebook_entropy(const RvqCodec& codec, std::span<const float> frame);

// Replaces each frame of every stream by its RVQ reconstruction.
FeatureSequence rvq_embed(const RvqCodec& codec, const FeatureSequence& seq);

// Mean squared reconstruction error over the rows of `frames`, using the first
// `stages` quantizers.
double rvq_reconstruction_error(const RvqCodec& codec, const FeatureMatrix& frames,
                                int stages);

// Copy of the codec restricted to its first `stages` quantizers.
RvqCodec rvq_truncate(const RvqCodec& codec, int stages);

nlohmann::json rvq_to_json(const RvqCodec& codec);
RvqCodec rvq_from_json(const nlohmann::json& doc);
void save_rvq(const std::string& path, const RvqCodec& codec);
RvqCodec load_rvq(const std::string& path);

}  // namespace ep
