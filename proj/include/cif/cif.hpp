// cif/cif.hpp

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

// Continuous integrate-and-fire.
//
// Per-frame weights are accumulated left to right. Each time the running sum
// reaches the threshold beta a token fires at that frame; the frame's weight
// is split so that exactly beta mass belongs to the finished token and the
// remainder opens the next one. Token embeddings are the weight-averaged
// (not normalized) encoder frames over each token's span.
//
// Internally the split is expressed through prefix sums S_t: token k owns the
// mass interval [k*beta, (k+1)*beta) and frame t owns [S_{t-1}, S_t), so the
// weight frame t contributes to token k is the length of their overlap. This
// form is what the backward pass differentiates.

#ifndef CIF_CIF_HPP_
#define CIF_CIF_HPP_

#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "cif/tensor.hpp"
#include "cif/types.hpp"

namespace cif {

// Per-frame information weights of one stream at the encoder frame rate.
struct WeightSequence {
  Stream stream = Stream::kMix;
  Tensor values;  // shape [T']
  double frame_shift_ms = 40.0;

  std::size_t size() const { return values.numel(); }
  double total() const;
};

struct FiringConfig {
  double beta = 1.0;
  // Eval mode: residual weight at the end fires one more token iff it is at
  // least this large.
  double tail_threshold = 0.5;
  // Eval mode: rescale a tail token to mass beta.
  bool normalize_tail = false;
};

struct FiringResult {
  Tensor embeddings;                    // [U, D]
  std::vector<std::size_t> boundaries;  // fired frame per token
  double residual_weight = 0.0;         // unfired mass left at the end

  std::size_t size() const { return boundaries.size(); }
};

// Train mode: a tail holding beta up to this relative slack still fires, so
// that a stream scaled to sum to U fires exactly U tokens despite rounding.
inline constexpr double kTrainTailSlack = 1e-6;

// mix = dropout(ma) + dropout(en) with inverted dropout; eval mode is the plain
// sum. Masks come from `seed` (ma) and a derived seed (en).
WeightSequence fuse_weights(const WeightSequence& ma, const WeightSequence& en, double dropout_p,
                            Mode mode, std::uint64_t seed);
// Same with explicit keep masks (1 = keep).
WeightSequence fuse_weights_with_masks(const WeightSequence& ma, const WeightSequence& en,
                                       double dropout_p, std::span<const std::uint8_t> keep_ma,
                                       std::span<const std::uint8_t> keep_en);

// w * U / sum(w). U == 0 gives zeros. Throws NumericalError when sum(w) == 0
// and U > 0.
WeightSequence scale_weights(const WeightSequence& w, std::size_t target_count);

// h: [T', D] encoder frames, w: [T'] non-negative weights.
FiringResult integrate_and_fire(const Tensor& h, const WeightSequence& w, const FiringConfig& cfg,
                                Mode mode);

BoundarySet boundaries_to_ms(const FiringResult& r, double frame_shift_ms);
BoundarySet boundaries_to_ms(std::span<const std::size_t> boundaries, double frame_shift_ms);

// Number of tokens fired at each of `frames` frames.
std::vector<int> fired_per_frame(std::span<const std::size_t> boundaries, std::size_t frames);

// One row per encoder frame; enough to redraw weight/boundary plots.
struct AlignmentTrace {
  std::vector<double> alpha_ma, alpha_en, alpha_mix;
  std::vector<int> fired_ma, fired_en, fired_mix;
  std::vector<int> gold;  // reference boundaries falling in the frame
};

// Columns: frame,alpha_ma,alpha_en,alpha_mix,fired_ma,fired_en,fired_mix,gold
void write_trace_csv(std::ostream& os, const AlignmentTrace& trace);

}  // namespace cif

#endif  // CIF_CIF_HPP_
