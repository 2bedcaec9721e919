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

#include <random>

#include <gtest/gtest.h>

#include "endpointer/common.hpp"
#include "endpointer/feature_io.hpp"

namespace ep {
namespace {

FeatureSequence random_sequence(int streams, int frames, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n01;
  FeatureSequence fs;
  fs.frame_rate_hz = 12.5f;
  for (int s = 0; s < streams; ++s) {
    FeatureMatrix m(frames, dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
    fs.streams.push_back(m);
  }
  return fs;
}

TEST(Epf1, RoundTripIsExact) {
  for (int streams : {1, 2}) {
    const auto fs = random_sequence(streams, 37, 5, 3);
    LabelSequence labels;
    for (int i = 0; i < 37; ++i) labels.labels.push_back(static_cast<FrameLabel>(i % 4));
    labels.labels[0] = FrameLabel::Pad;
    const auto bytes = encode_epf1(fs, &labels);
    EXPECT_EQ(bytes.size(), kEpf1HeaderBytes + static_cast<std::size_t>(streams) * 37 * 5 * 4 + 37);
    const auto back = decode_epf1(bytes);
    ASSERT_EQ(back.features.n_streams(), static_cast<std::size_t>(streams));
    for (int s = 0; s < streams; ++s) {
      EXPECT_EQ(back.features.streams[static_cast<std::size_t>(s)],
                fs.streams[static_cast<std::size_t>(s)]);
    }
    EXPECT_EQ(back.features.frame_rate_hz, 12.5f);
    ASSERT_TRUE(back.labels.has_value());
    EXPECT_EQ(back.labels->labels, labels.labels);
  }
}

TEST(Epf1, HeaderLayout) {
  const auto fs = random_sequence(2, 3, 4, 1);
  const auto b = encode_epf1(fs);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "EPF1");
  EXPECT_EQ(b[4], 1);  // version, little-endian
  EXPECT_EQ(b[8], 2);  // n_streams
  EXPECT_EQ(b[9], 4);  // dim
  EXPECT_EQ(b[17], 3);  // num_frames
  EXPECT_EQ(b[21], 0);  // has_labels
}

TEST(Epf1, WrongMagicIsFormatError) {
  auto b = encode_epf1(random_sequence(1, 3, 2, 1));
  b[0] = 'X';
  try {
    decode_epf1(b);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 0u);
  }
}

TEST(Epf1, TruncatedPayloadReportsOffset) {
  auto b = encode_epf1(random_sequence(1, 10, 3, 1));
  b.resize(b.size() - 7);
  try {
    decode_epf1(b);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), kEpf1HeaderBytes);
  }
}

TEST(Epf1, BadVersionAndLabelValues) {
  auto b = encode_epf1(random_sequence(1, 2, 2, 1));
  b[4] = 9;
  EXPECT_THROW(decode_epf1(b), FormatError);

  const auto fs = random_sequence(1, 2, 2, 1);
  LabelSequence l;
  l.labels = {FrameLabel::User, FrameLabel::User};
  auto c = encode_epf1(fs, &l);
  c.back() = 7;
  EXPECT_THROW(decode_epf1(c), FormatError);
}

TEST(Epf1, TwoStreamLengthsMatch) {
  const auto fs = random_sequence(2, 11, 3, 2);
  const auto back = decode_epf1(encode_epf1(fs));
  EXPECT_EQ(back.features.n_streams(), 2u);
  EXPECT_EQ(back.features.streams[0].rows(), back.features.streams[1].rows());
}

TEST(Epf1, MismatchedStreamsRejectedOnWrite) {
  auto fs = random_sequence(2, 4, 3, 2);
  fs.streams[1] = fs.streams[1].topRows(3).eval();
  EXPECT_THROW(encode_epf1(fs), ConfigError);
}

}  // namespace
}  // namespace ep
