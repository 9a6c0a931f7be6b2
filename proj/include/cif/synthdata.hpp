// cif/synthdata.hpp

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

// Synthetic bilingual corpus with exact token boundaries.
//
// Every token id owns a fixed random prototype vector; a token occupies a
// run of frames equal to its prototype plus iid Gaussian noise. Mandarin-like
// prototypes are independent draws and their tokens last longer;
// English-like prototypes share a common component (so they resemble each
// other) and their tokens are shorter. Languages follow a two-state Markov
// chain. A silence run closes each utterance and carries the terminator.
//
// Manifest directory layout:
//   manifest.tsv    header line, then one record per utterance
//   feats/<id>.txt  one frame per line, feat_dim values separated by spaces
//   feats/<id>.bin  (binary variant) u64 T, u64 F, then T*F little-endian f64
//
// Header: "#cif-manifest v1 n_ma=<int> n_en=<int> feat_dim=<int>"
// Record: five tab-separated fields
//   utt_id        no whitespace
//   features      path relative to the manifest directory
//   tokens        space-separated ids; the last one is 1 (</s>)
//   langs         space-separated "ma" / "en", one per content token
//   boundaries    space-separated gold token end times in ms
// Floats are written in shortest round-trip form, so read(write(c)) == c.

#ifndef CIF_SYNTHDATA_HPP_
#define CIF_SYNTHDATA_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cif/labels.hpp"
#include "cif/tensor.hpp"
#include "cif/types.hpp"

namespace cif {

struct SynthSpec {
  std::size_t n_ma = 19;
  std::size_t n_en = 19;
  std::size_t feat_dim = 8;
  std::size_t ma_min_frames = 8, ma_max_frames = 12;
  std::size_t en_min_frames = 4, en_max_frames = 8;
  std::size_t silence_min_frames = 4, silence_max_frames = 8;
  std::size_t min_tokens = 3, max_tokens = 8;
  double sigma = 0.1;
  double switch_prob = 0.3;
  // Weight of the shared component in English-like prototypes, in [0, 1).
  double en_similarity = 0.5;
  // When false a token never directly repeats its predecessor.
  bool allow_repeats = false;
  double frame_shift_ms = 10.0;
  std::uint64_t seed = 7;
};

// Throws ConfigError.
void validate(const SynthSpec& spec);

struct SynthUtterance {
  std::string id;
  Tensor features;  // [T, feat_dim]
  BilingualTranscript transcript;
  BoundarySet gold;  // end time of each content token

  bool operator==(const SynthUtterance& o) const;
};

struct Corpus {
  Vocabulary vocab;
  std::size_t feat_dim = 0;
  std::vector<SynthUtterance> utterances;

  bool operator==(const Corpus& o) const;
};

// Prototype table [vocab size, feat_dim]; rows of specials are zero and
// row </s> is the silence prototype.
std::vector<std::vector<double>> prototypes(const SynthSpec& spec);

// Utterances offset .. offset + n - 1. Each one draws from its own sub-seed,
// so a corpus is a contiguous slice of one infinite stream per seed.
Corpus generate(const SynthSpec& spec, std::size_t n, std::size_t offset = 0);

struct CorpusStats {
  std::size_t utterances = 0;
  std::size_t ma_tokens = 0;
  std::size_t en_tokens = 0;
  std::size_t switch_points = 0;
  std::size_t frames = 0;
};

CorpusStats corpus_stats(const Corpus& c);

void write_manifest(const Corpus& c, const std::filesystem::path& dir, bool binary = false);
// Throws DataError naming file and line for malformed input.
Corpus read_manifest(const std::filesystem::path& dir);

}  // namespace cif

#endif  // CIF_SYNTHDATA_HPP_
