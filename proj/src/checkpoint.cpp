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

#include "lowres/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace lowres {

std::string dims_to_string(const Dims& dims) {
  std::string out = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(dims[i]);
  }
  return out + "]";
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  const std::uint8_t* take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw std::runtime_error("checkpoint truncated");
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32() {
    const std::uint8_t* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const std::uint8_t* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_bundle(const TensorBundle& bundle) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u64(out, bundle.size());
  for (const auto& [name, tensor] : bundle) {
    put_u64(out, name.size());
    out.insert(out.end(), name.begin(), name.end());
    put_u64(out, tensor.rank());
    for (std::size_t d : tensor.dims()) put_u64(out, d);
    for (float v : tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

TensorBundle decode_bundle(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (std::memcmp(in.take(8), kCheckpointMagic, 8) != 0) throw std::runtime_error("bad checkpoint magic");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint64_t count = in.u64();
  TensorBundle bundle;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::uint64_t name_len = in.u64();
    if (name_len > in.remaining()) throw std::runtime_error("checkpoint truncated");
    const auto* name_bytes = in.take(name_len);
    std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
    const std::uint64_t rank = in.u64();
    if (rank > 16) throw std::runtime_error("implausible tensor rank in checkpoint");
    Dims dims(rank);
    for (auto& d : dims) d = in.u64();
    const std::size_t n = element_count(dims);
    if (n > in.remaining() / 4) throw std::runtime_error("checkpoint truncated");
    std::vector<float> data(n);
    for (auto& v : data) v = std::bit_cast<float>(in.u32());
    bundle.push_back({std::move(name), Tensor<float>(std::move(dims), std::move(data))});
  }
  if (!in.done()) throw std::runtime_error("trailing bytes after checkpoint");
  return bundle;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError(path.parent_path(), "cannot create directory: " + ec.message());
  }
  // Write-then-rename so a crashed writer never leaves a half file at the final path.
  auto tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(tmp, "cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(tmp, "write failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path, "rename failed: " + ec.message());
}

void save_bundle(const std::filesystem::path& path, const TensorBundle& bundle) {
  write_file_bytes(path, encode_bundle(bundle));
}

TensorBundle load_bundle(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_bundle(bytes);
  } catch (const std::runtime_error& e) {
    throw IoError(path, e.what());
  }
}

const NamedTensor* find_tensor(const TensorBundle& bundle, const std::string& name) {
  for (const auto& nt : bundle) {
    if (nt.name == name) return &nt;
  }
  return nullptr;
}

const Tensor<float>& require_tensor(const TensorBundle& bundle, const std::string& name) {
  const NamedTensor* nt = find_tensor(bundle, name);
  if (!nt) throw std::invalid_argument("checkpoint has no tensor named '" + name + "'");
  return nt->tensor;
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t bundle_hash(const TensorBundle& bundle) {
  const auto bytes = encode_bundle(bundle);
  return fnv1a(bytes.data(), bytes.size());
}

std::string hex64(std::uint64_t value) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << value;
  return os.str();
}

}  // namespace lowres
