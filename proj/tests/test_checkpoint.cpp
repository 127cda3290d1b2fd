// Copyright 2026 The lowres Authors.
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

#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <random>

#include "lowres/checkpoint.hpp"
#include "test_util.hpp"

namespace lowres {
namespace {

TensorBundle sample_bundle() {
  std::mt19937_64 rng(3);
  return {{"a.w", testing::random_tensor<float>({2, 3}, rng)},
          {"b", Tensor<float>::vector({1.5f, -0.0f, 3e-38f})},
          {"scalarish", Tensor<float>({1}, 7.0f)}};
}

void put(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

TEST(Checkpoint, ByteLayout) {
  const TensorBundle b{{"xy", Tensor<float>({1, 2}, std::vector<float>{1.0f, -2.5f})}};
  std::vector<std::uint8_t> expected{'L', 'O', 'W', 'R', 'E', 'S', 'C', 'K'};
  put(expected, 1, 4);  // version
  put(expected, 1, 8);  // tensor count
  put(expected, 2, 8);
  expected.push_back('x');
  expected.push_back('y');
  put(expected, 2, 8);  // rank
  put(expected, 1, 8);
  put(expected, 2, 8);
  put(expected, 0x3f800000u, 4);
  put(expected, 0xc0200000u, 4);
  EXPECT_EQ(encode_bundle(b), expected);
}

TEST(Checkpoint, EncodeDecodeRoundTrip) {
  const auto b = sample_bundle();
  const auto bytes = encode_bundle(b);
  const auto back = decode_bundle(bytes);
  ASSERT_EQ(back.size(), b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    EXPECT_EQ(back[i].name, b[i].name);
    EXPECT_EQ(back[i].tensor.dims(), b[i].tensor.dims());
    for (std::size_t k = 0; k < b[i].tensor.size(); ++k)
      EXPECT_EQ(std::bit_cast<std::uint32_t>(back[i].tensor[k]), std::bit_cast<std::uint32_t>(b[i].tensor[k]));
  }
  EXPECT_EQ(encode_bundle(back), bytes);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  const auto dir = testing::scratch_dir("checkpoint");
  save_bundle(dir / "one.ckpt", sample_bundle());
  save_bundle(dir / "nested/two.ckpt", load_bundle(dir / "one.ckpt"));
  EXPECT_EQ(read_file_bytes(dir / "one.ckpt"), read_file_bytes(dir / "nested/two.ckpt"));
}

TEST(Checkpoint, RejectsCorruptInput) {
  auto bytes = encode_bundle(sample_bundle());
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_bundle(bad_magic), std::runtime_error);
  auto bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(decode_bundle(bad_version), std::runtime_error);
  EXPECT_THROW(decode_bundle({bytes.begin(), bytes.end() - 1}), std::runtime_error);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_bundle(trailing), std::runtime_error);
}

TEST(Checkpoint, MissingFileReportsPath) {
  const auto path = testing::scratch_dir("checkpoint_missing") / "absent.ckpt";
  try {
    load_bundle(path);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_EQ(e.path(), path);
    EXPECT_NE(std::string(e.what()).find("absent.ckpt"), std::string::npos);
  }
}

TEST(Checkpoint, LookupAndHash) {
  const auto b = sample_bundle();
  EXPECT_EQ(find_tensor(b, "b")->tensor.size(), 3u);
  EXPECT_EQ(find_tensor(b, "nope"), nullptr);
  EXPECT_THROW(require_tensor(b, "nope"), std::invalid_argument);
  auto c = b;
  EXPECT_EQ(bundle_hash(b), bundle_hash(c));
  c[0].tensor[0] += 1.0f;
  EXPECT_NE(bundle_hash(b), bundle_hash(c));
  EXPECT_EQ(hex64(0x0123456789abcdefULL), "0123456789abcdef");
  // FNV-1a reference values.
  EXPECT_EQ(fnv1a("", 0), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a", 1), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
}  // namespace lowres
