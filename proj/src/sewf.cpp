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

#include "percept/sewf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace percept::sewf {

static_assert(std::endian::native == std::endian::little,
              "SEWF payloads are copied verbatim and assume a little-endian host");

namespace {

std::size_t dtype_width(DType d) {
  switch (d) {
    case DType::kF32:
      return 4;
    case DType::kF64:
      return 8;
    case DType::kU8:
      return 1;
  }
  throw FormatError("unknown dtype");
}

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    T v;
    std::memcpy(&v, take(sizeof(T), what), sizeof(T));
    return v;
  }

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (n > bytes_.size() - pos_) {
      throw FormatError(std::string("truncated SEWF file while reading ") + what);
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::size_t Entry::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<std::uint8_t> serialize(const std::vector<Entry>& entries) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'S', 'E', 'W', 'F'});
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const Entry& e : entries) {
    if (e.name.size() > 0xffff) throw FormatError("tensor name too long: " + e.name);
    if (e.dims.size() > 0xff) throw FormatError("tensor rank too large: " + e.name);
    if (e.payload.size() != e.element_count() * dtype_width(e.dtype)) {
      throw FormatError("payload size does not match dims for " + e.name);
    }
    put<std::uint16_t>(out, static_cast<std::uint16_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.dtype));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) put<std::uint32_t>(out, d);
    out.insert(out.end(), e.payload.begin(), e.payload.end());
  }
  return out;
}

std::vector<Entry> parse(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::uint8_t* magic = r.take(4, "magic");
  if (std::memcmp(magic, "SEWF", 4) != 0) throw FormatError("bad magic: not a SEWF file");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) {
    throw FormatError("unsupported SEWF version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>("tensor count");
  std::vector<Entry> entries;
  entries.reserve(std::min<std::uint32_t>(count, 4096));
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    const auto name_len = r.get<std::uint16_t>("name length");
    const std::uint8_t* name = r.take(name_len, "name");
    e.name.assign(reinterpret_cast<const char*>(name), name_len);
    const auto dtype = r.get<std::uint8_t>("dtype");
    if (dtype > static_cast<std::uint8_t>(DType::kU8)) {
      throw FormatError("unknown dtype code " + std::to_string(dtype) + " for tensor " + e.name);
    }
    e.dtype = static_cast<DType>(dtype);
    const auto rank = r.get<std::uint8_t>("rank");
    e.dims.resize(rank);
    for (auto& d : e.dims) d = r.get<std::uint32_t>("dims");
    const std::size_t n = e.element_count() * dtype_width(e.dtype);
    const std::uint8_t* data = r.take(n, "tensor payload");
    e.payload.assign(data, data + n);
    entries.push_back(std::move(e));
  }
  if (!r.done()) throw FormatError("trailing bytes after the last SEWF tensor");
  return entries;
}

void write_file(const std::filesystem::path& path, const std::vector<Entry>& entries) {
  const std::vector<std::uint8_t> bytes = serialize(entries);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing " + path.string());
}

std::vector<Entry> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  try {
    return parse(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

template <typename Scalar>
Entry tensor_entry(const std::string& name, const std::vector<Index>& dims,
                   const Tensor<Scalar>& value) {
  Entry e;
  e.name = name;
  e.dtype = dtype_of<Scalar>();
  for (Index d : dims) e.dims.push_back(static_cast<std::uint32_t>(d));
  if (static_cast<Index>(e.element_count()) != value.size()) {
    throw FormatError("tensor " + name + " has " + std::to_string(value.size()) +
                      " values but dims " + shape_string(dims));
  }
  const auto* p = reinterpret_cast<const std::uint8_t*>(value.data());
  e.payload.assign(p, p + value.size() * sizeof(Scalar));
  return e;
}

Entry text_entry(const std::string& name, std::string_view text) {
  Entry e;
  e.name = name;
  e.dtype = DType::kU8;
  e.dims = {static_cast<std::uint32_t>(text.size())};
  e.payload.assign(text.begin(), text.end());
  return e;
}

std::string entry_text(const Entry& e) {
  if (e.dtype != DType::kU8) throw FormatError("entry " + e.name + " is not a byte payload");
  return std::string(e.payload.begin(), e.payload.end());
}

template <typename Scalar>
void load_into(const Entry& e, Parameter<Scalar>& p) {
  if (e.dtype != dtype_of<Scalar>()) {
    throw FormatError("tensor " + e.name + " has dtype " + dtype_name(e.dtype) + ", expected " +
                      dtype_name(dtype_of<Scalar>()));
  }
  std::vector<Index> dims(e.dims.begin(), e.dims.end());
  if (dims != p.dims) {
    throw FormatError("tensor " + e.name + " has shape " + shape_string(dims) + ", expected " +
                      shape_string(p.dims));
  }
  std::memcpy(p.value.data(), e.payload.data(), e.payload.size());
}

DType first_tensor_dtype(const std::vector<Entry>& entries) {
  for (const Entry& e : entries) {
    if (e.dtype != DType::kU8) return e.dtype;
  }
  throw FormatError("SEWF file holds no numeric tensors");
}

const Entry* find(const std::vector<Entry>& entries, std::string_view name) {
  for (const Entry& e : entries) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

template Entry tensor_entry<float>(const std::string&, const std::vector<Index>&,
                                   const Tensor<float>&);
template Entry tensor_entry<double>(const std::string&, const std::vector<Index>&,
                                    const Tensor<double>&);
template void load_into<float>(const Entry&, Parameter<float>&);
template void load_into<double>(const Entry&, Parameter<double>&);

}  // namespace percept::sewf
