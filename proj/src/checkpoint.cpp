// src/checkpoint.cpp

// Copyright 2026  The cif-align Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "cif/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "cif/errors.hpp"

namespace cif {

namespace {

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  auto u = static_cast<std::make_unsigned_t<T>>(v);
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& is, const std::filesystem::path& path) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw DataError("truncated checkpoint " + path.string());
  }
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    u |= static_cast<std::make_unsigned_t<T>>(buf[i]) << (8 * i);
  return static_cast<T>(u);
}

bool has_prefix(const std::string& s, const std::vector<std::string>& prefixes) {
  for (const auto& p : prefixes)
    if (s.rfind(p, 0) == 0) return true;
  return false;
}

}  // namespace

void save_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  os.write(kCheckpointMagic, 4);
  put_le<std::uint32_t>(os, kCheckpointVersion);
  put_le<std::uint64_t>(os, tensors.size());
  for (const auto& [name, t] : tensors) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_le<std::uint64_t>(os, d);
    for (double v : t.data()) put_le<std::uint64_t>(os, std::bit_cast<std::uint64_t>(v));
  }
  if (!os) throw DataError("write failed for checkpoint " + path.string());
}

std::vector<NamedTensor> load_tensors(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw DataError("not a checkpoint (bad magic): " + path.string());
  }
  const auto version = get_le<std::uint32_t>(is, path);
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = get_le<std::uint64_t>(is, path);
  std::vector<NamedTensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint32_t>(is, path);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw DataError("truncated checkpoint " + path.string());
    const auto rank = get_le<std::uint32_t>(is, path);
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(get_le<std::uint64_t>(is, path));
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(is, path));
    out.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values))});
  }
  return out;
}

Tensor& ParameterStore::add(const std::string& name, Shape shape, std::vector<double> values) {
  if (by_name_.count(name) != 0) throw ContractError("duplicate parameter " + name);
  names_.push_back(name);
  auto [it, _] = by_name_.emplace(name, Tensor::parameter(std::move(shape), std::move(values)));
  return it->second;
}

bool ParameterStore::contains(const std::string& name) const { return by_name_.count(name) != 0; }

Tensor& ParameterStore::get(const std::string& name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ContractError("unknown parameter " + name);
  return it->second;
}

const Tensor& ParameterStore::get(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ContractError("unknown parameter " + name);
  return it->second;
}

std::vector<Tensor> ParameterStore::tensors() const {
  std::vector<Tensor> out;
  for (const auto& n : names_) out.push_back(by_name_.at(n));
  return out;
}

std::vector<Tensor> ParameterStore::tensors_with_prefix(
    const std::vector<std::string>& prefixes) const {
  std::vector<Tensor> out;
  for (const auto& n : names_)
    if (has_prefix(n, prefixes)) out.push_back(by_name_.at(n));
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : by_name_) n += t.numel();
  return n;
}

std::size_t ParameterStore::scalar_count_with_prefix(
    const std::vector<std::string>& prefixes) const {
  std::size_t n = 0;
  for (const auto& name : names_)
    if (has_prefix(name, prefixes)) n += by_name_.at(name).numel();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [_, t] : by_name_) t.zero_grad();
}

}  // namespace cif
