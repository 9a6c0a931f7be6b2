// cif/checkpoint.hpp

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

// Binary parameter checkpoints.
//
// Layout, all integers and floats little-endian:
//   magic    4 bytes  "CIFT"
//   version  u32      1
//   count    u64      number of tensors
//   then per tensor:
//     name_len u32, name bytes (UTF-8, no terminator)
//     rank     u32, dims u64 x rank
//     values   f64 x product(dims)

#ifndef CIF_CHECKPOINT_HPP_
#define CIF_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cif/tensor.hpp"

namespace cif {

inline constexpr char kCheckpointMagic[4] = {'C', 'I', 'F', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

void save_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
// Throws DataError on a bad magic, unknown version or truncated file.
std::vector<NamedTensor> load_tensors(const std::filesystem::path& path);

// Named trainable parameters in registration order.
class ParameterStore {
 public:
  // Registers a parameter; names must be unique.
  Tensor& add(const std::string& name, Shape shape, std::vector<double> values);

  bool contains(const std::string& name) const;
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::vector<Tensor> tensors() const;
  // Parameters whose names start with one of the prefixes.
  std::vector<Tensor> tensors_with_prefix(const std::vector<std::string>& prefixes) const;
  std::size_t scalar_count() const;
  std::size_t scalar_count_with_prefix(const std::vector<std::string>& prefixes) const;

  void zero_grad();

 private:
  std::vector<std::string> names_;
  std::map<std::string, Tensor> by_name_;
};

}  // namespace cif

#endif  // CIF_CHECKPOINT_HPP_
