// src/types.cpp

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

#include "cif/types.hpp"

namespace cif {

std::string_view lang_name(Lang l) { return l == Lang::kMa ? "ma" : "en"; }

std::string_view stream_name(Stream s) {
  switch (s) {
    case Stream::kMa:
      return "ma";
    case Stream::kEn:
      return "en";
    case Stream::kMix:
      break;
  }
  return "mix";
}

}  // namespace cif
