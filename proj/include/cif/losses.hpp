// cif/losses.hpp

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

// Training objectives. All losses are sums over the positions of one
// utterance (no length normalization).

#ifndef CIF_LOSSES_HPP_
#define CIF_LOSSES_HPP_

#include <cstddef>
#include <iosfwd>
#include <span>

#include "cif/cif.hpp"
#include "cif/labels.hpp"
#include "cif/tensor.hpp"

namespace cif {

struct LossWeights {
  double lambda_ctc = 0.5;
  double lambda_qua = 0.01;
  double lambda_nar = 0.2;
  double lambda_lcd = 0.1;
};

struct LossBundle {
  double ar_ce = 0.0;
  double ctc = 0.0;
  double quantity = 0.0;
  double nar_ce = 0.0;
  double lcd_bce = 0.0;
  double total = 0.0;
};

// |U_mix - sum(mix)| + (|U_ma - sum(ma)| + |U_en - sum(en)|) / 2 on raw
// (unscaled) estimator outputs.
Tensor quantity_loss(const WeightSequence& ma, const WeightSequence& en, const WeightSequence& mix,
                     const QuantityTargets& targets);
// Single-estimator form: |U_mix - sum(mix)|.
Tensor quantity_loss_mix_only(const WeightSequence& mix, std::size_t u_mix);

// -sum_t log softmax(logits[t])[targets[t]]; logits [U, V].
Tensor cross_entropy(const Tensor& logits, std::span<const TokenId> targets);

inline Tensor ar_ce_loss(const Tensor& logits, std::span<const TokenId> targets) {
  return cross_entropy(logits, targets);
}

// Sum of the two monolingual cross-entropies. A language with no targets
// contributes 0 and its logits may be undefined.
Tensor nar_ce_loss(const Tensor& ma_logits, std::span<const TokenId> ma_targets,
                   const Tensor& en_logits, std::span<const TokenId> en_targets);

inline constexpr double kBceClamp = 1e-7;

// -sum_t [l log p + (1 - l) log(1 - p)], p clamped to [1e-7, 1 - 1e-7].
Tensor lcd_bce_loss(const Tensor& probs, const LanguageChangeTargets& targets);

// Minimum frames needed to align `targets` under CTC (one blank between
// repeated labels).
std::size_t ctc_min_frames(std::span<const TokenId> targets);

// -log sum over all CTC paths collapsing to `targets`, by the log-space
// forward algorithm; logits [T', V + 1]. Gradients come from the matching
// backward recursion. Throws InfeasibleAlignmentError when T' is too short.
Tensor ctc_loss(const Tensor& logits, std::span<const TokenId> targets, TokenId blank);

// Terms entering the joint objective. Undefined tensors count as 0.
struct LossTerms {
  Tensor ar_ce, ctc, quantity, nar_ce, lcd_bce;
};

struct CombinedLoss {
  Tensor total;
  LossBundle bundle;
};

// total = ar + l_ctc*ctc + l_qua*qua + l_nar*nar + l_lcd*lcd. Throws
// NumericalError naming the first non-finite term.
CombinedLoss combine(const LossTerms& terms, const LossWeights& weights);

// Line-delimited loss records: step ar_ce ctc quantity nar_ce lcd_bce total,
// tab separated, after a header line.
void write_loss_log_header(std::ostream& os);
void write_loss_log_record(std::ostream& os, std::size_t step, const LossBundle& b);

}  // namespace cif

#endif  // CIF_LOSSES_HPP_
