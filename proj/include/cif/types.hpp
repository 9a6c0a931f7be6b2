// cif/types.hpp

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

#ifndef CIF_TYPES_HPP_
#define CIF_TYPES_HPP_

#include <cstdint>
#include <string_view>
#include <vector>

namespace cif {

using TokenId = std::int64_t;
using TokenSequence = std::vector<TokenId>;

enum class Lang { kMa, kEn };

// A weight stream: one of the two languages or their mixture.
enum class Stream { kMa, kEn, kMix };

enum class Mode { kTrain, kEval };

std::string_view lang_name(Lang l);
std::string_view stream_name(Stream s);

// Boundary timestamps in milliseconds, sorted ascending.
struct BoundarySet {
  std::vector<double> times_ms;

  bool operator==(const BoundarySet&) const = default;
};

}  // namespace cif

#endif  // CIF_TYPES_HPP_
