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

#include "percept/tensor.hpp"

#include <cmath>
#include <sstream>

namespace percept {

const char* dtype_name(DType dtype) {
  switch (dtype) {
    case DType::kF32:
      return "f32";
    case DType::kF64:
      return "f64";
    case DType::kU8:
      return "u8";
  }
  return "unknown";
}

Index shape_numel(const std::vector<Index>& dims) {
  Index n = 1;
  for (Index d : dims) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_string(dims));
    n *= d;
  }
  return n;
}

std::string shape_string(const std::vector<Index>& dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) os << " x ";
    os << dims[i];
  }
  os << ']';
  return os.str();
}

template <typename Scalar>
Parameter<Scalar>::Parameter(std::string n, std::vector<Index> d)
    : name(std::move(n)), dims(std::move(d)) {
  if (dims.empty()) throw ShapeError("parameter " + name + " has rank 0");
  const Index rows = dims.front();
  const Index cols = shape_numel(dims) / rows;
  value.setZero(rows, cols);
  grad.setZero(rows, cols);
}

template <typename Scalar>
void kaiming_uniform(Tensor<Scalar>& w, Index fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(dist(rng));
}

template <typename Scalar>
void he_uniform(Tensor<Scalar>& w, Index fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(dist(rng));
}

template struct Parameter<float>;
template struct Parameter<double>;
template void kaiming_uniform<float>(Tensor<float>&, Index, std::mt19937_64&);
template void kaiming_uniform<double>(Tensor<double>&, Index, std::mt19937_64&);
template void he_uniform<float>(Tensor<float>&, Index, std::mt19937_64&);
template void he_uniform<double>(Tensor<double>&, Index, std::mt19937_64&);

}  // namespace percept
