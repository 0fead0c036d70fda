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

/// \file
/// SEWF: a flat little-endian container of named tensors.
///
///   "SEWF" | u32 version (1) | u32 tensor_count
///   per tensor: u16 name_len | name bytes (UTF-8) | u8 dtype | u8 rank |
///               u32 dims[rank] | row-major payload
///
/// dtype 0 is f32 and 1 is f64. dtype 2 (u8) carries opaque bytes such as
/// the JSON config record that models store as their first entry.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "percept/tensor.hpp"

namespace percept::sewf {

inline constexpr std::uint32_t kVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Entry {
  std::string name;
  DType dtype = DType::kF32;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;

  std::size_t element_count() const;
};

std::vector<std::uint8_t> serialize(const std::vector<Entry>& entries);
std::vector<Entry> parse(std::span<const std::uint8_t> bytes);

void write_file(const std::filesystem::path& path, const std::vector<Entry>& entries);
std::vector<Entry> read_file(const std::filesystem::path& path);

template <typename Scalar>
Entry tensor_entry(const std::string& name, const std::vector<Index>& dims,
                   const Tensor<Scalar>& value);

template <typename Scalar>
Entry tensor_entry(const Parameter<Scalar>& p) {
  return tensor_entry(p.name, p.dims, p.value);
}

Entry text_entry(const std::string& name, std::string_view text);
std::string entry_text(const Entry& e);

/// Copies a tensor entry into `p`, rejecting dtype or shape mismatches.
template <typename Scalar>
void load_into(const Entry& e, Parameter<Scalar>& p);

/// dtype of the first floating-point tensor, for picking a Scalar at runtime.
DType first_tensor_dtype(const std::vector<Entry>& entries);

const Entry* find(const std::vector<Entry>& entries, std::string_view name);

}  // namespace percept::sewf
