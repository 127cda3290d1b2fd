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

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lowres {

using Dims = std::vector<std::size_t>;

inline std::size_t element_count(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string dims_to_string(const Dims& dims);

/// Dense row-major n-dimensional array.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Dims dims, T fill = T{0}) : dims_(std::move(dims)), data_(element_count(dims_), fill) {}
  Tensor(Dims dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
    if (data_.size() != element_count(dims_)) {
      throw std::invalid_argument("tensor buffer of " + std::to_string(data_.size()) +
                                  " elements does not match dims " + dims_to_string(dims_));
    }
  }
  static Tensor vector(std::initializer_list<T> values) {
    return Tensor({values.size()}, std::vector<T>(values));
  }

  const Dims& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  T* raw() { return data_.data(); }
  const T* raw() const { return data_.data(); }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  void reshape(Dims dims) {
    if (element_count(dims) != data_.size()) {
      throw std::invalid_argument("cannot reshape " + dims_to_string(dims_) + " to " + dims_to_string(dims));
    }
    dims_ = std::move(dims);
  }

  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(dims_, std::move(out));
  }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(other, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  void require_same_shape(const Tensor& other, const char* what) const {
    if (dims_ != other.dims_) {
      throw std::invalid_argument(std::string("shape mismatch in ") + what + ": " + dims_to_string(dims_) +
                                  " vs " + dims_to_string(other.dims_));
    }
  }

  Dims dims_;
  std::vector<T> data_;
};

/// A named, mutable view of one parameter (or gradient) tensor inside a model.
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* tensor;
};

template <typename T>
void require_shape(const Tensor<T>& t, const Dims& expected, const std::string& what) {
  if (t.dims() != expected) {
    throw std::invalid_argument(what + ": expected shape " + dims_to_string(expected) + ", got " +
                                dims_to_string(t.dims()));
  }
}

}  // namespace lowres
