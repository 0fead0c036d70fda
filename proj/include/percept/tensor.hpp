// Copyright 2026 The Percept Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace percept {

using Index = Eigen::Index;

/// Dense row-major 2-D array. Higher-rank parameters are stored with the
/// first logical dimension as rows and the remaining ones flattened into
/// columns, which matches the row-major layout of the full n-d array.
template <typename Scalar>
using Tensor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1, kU8 = 2 };

template <typename Scalar>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>);
  return std::is_same_v<Scalar, float> ? DType::kF32 : DType::kF64;
}

const char* dtype_name(DType dtype);

/// A named trainable (or frozen) array together with its gradient slot.
template <typename Scalar>
struct Parameter {
  std::string name;
  std::vector<Index> dims;
  Tensor<Scalar> value;
  Tensor<Scalar> grad;

  Parameter() = default;
  Parameter(std::string n, std::vector<Index> d);

  Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Product of dims; throws on non-positive entries.
Index shape_numel(const std::vector<Index>& dims);
std::string shape_string(const std::vector<Index>& dims);

/// Kaiming-uniform with a = sqrt(5), i.e. U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
template <typename Scalar>
void kaiming_uniform(Tensor<Scalar>& w, Index fan_in, std::mt19937_64& rng);

/// He-uniform, U(-sqrt(6/fan_in), sqrt(6/fan_in)). Keeps activation variance
/// roughly constant through ReLU-like layers.
template <typename Scalar>
void he_uniform(Tensor<Scalar>& w, Index fan_in, std::mt19937_64& rng);

template <typename Scalar>
bool all_finite(const Tensor<Scalar>& t) {
  return t.allFinite();
}

#ifndef NDEBUG
#define PERCEPT_CHECK_FINITE(t, what)                                        \
  do {                                                                       \
    if (!(t).allFinite()) throw std::runtime_error(std::string("non-finite values in ") + (what)); \
  } while (0)
#else
#define PERCEPT_CHECK_FINITE(t, what) \
  do {                                \
  } while (0)
#endif

}  // namespace percept
