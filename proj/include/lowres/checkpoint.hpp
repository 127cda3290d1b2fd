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

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "lowres/tensor.hpp"

namespace lowres {

/// Raised when a file cannot be read or written; carries the offending path.
class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, const std::string& what)
      : std::runtime_error(path.string() + ": " + what), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

using TensorBundle = std::vector<NamedTensor>;

// Checkpoint container layout (all integers little-endian):
//   magic "LOWRESCK" (8 bytes), u32 version, u64 tensor count,
//   per tensor: u64 name length, name bytes, u64 rank, rank x u64 extents,
//   product(extents) x f32 data.
inline constexpr char kCheckpointMagic[8] = {'L', 'O', 'W', 'R', 'E', 'S', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_bundle(const TensorBundle& bundle);
TensorBundle decode_bundle(const std::vector<std::uint8_t>& bytes);

void save_bundle(const std::filesystem::path& path, const TensorBundle& bundle);
TensorBundle load_bundle(const std::filesystem::path& path);

const NamedTensor* find_tensor(const TensorBundle& bundle, const std::string& name);
const Tensor<float>& require_tensor(const TensorBundle& bundle, const std::string& name);

/// FNV-1a over the encoded bundle; used to key feature caches on parameter contents.
std::uint64_t bundle_hash(const TensorBundle& bundle);
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace lowres
