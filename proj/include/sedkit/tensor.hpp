/* Copyright 2026 The sedkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "sedkit/common.hpp"

namespace sedkit {

// Dense row-major tensor of doubles. All kernels operate on raw pointers;
// this is just the owning container with shape bookkeeping.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(numel(shape_), 0.0);
  }
  Tensor(std::initializer_list<int> shape) : Tensor(std::vector<int>(shape)) {}

  static int64_t numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
      if (d < 0) throw InvalidInput("tensor dimension must be non-negative");
      n *= d;
    }
    return n;
  }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  double& at2(int i, int j) { return data_[static_cast<size_t>(i) * dim(1) + j]; }
  double at2(int i, int j) const { return data_[static_cast<size_t>(i) * dim(1) + j]; }
  double& at3(int i, int j, int k) {
    return data_[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
  }
  double at3(int i, int j, int k) const {
    return data_[(static_cast<size_t>(i) * dim(1) + j) * dim(2) + k];
  }
  double& at4(int i, int j, int k, int l) {
    return data_[((static_cast<size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }
  double at4(int i, int j, int k, int l) const {
    return data_[((static_cast<size_t>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(0.0); }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

}  // namespace sedkit
