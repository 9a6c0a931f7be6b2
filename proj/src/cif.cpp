// src/cif.cpp

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

#include "cif/cif.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "cif/errors.hpp"
#include "cif/random.hpp"

namespace cif {

namespace {

using detail::Node;

// Weight frame t hands to token k.
struct Portion {
  std::size_t token;
  std::size_t frame;
  double weight;
  bool upper_binding;  // S_t is the overlap's upper end
  bool lower_binding;  // S_{t-1} is the overlap's lower end
};

void require_weights(const WeightSequence& w) {
  if (!w.values.defined() || w.values.rank() != 1) {
    throw DimensionError("weight sequence must be a vector");
  }
}

}  // namespace

double WeightSequence::total() const {
  double s = 0.0;
  for (double v : values.data()) s += v;
  return s;
}

WeightSequence fuse_weights_with_masks(const WeightSequence& ma, const WeightSequence& en,
                                       double dropout_p, std::span<const std::uint8_t> keep_ma,
                                       std::span<const std::uint8_t> keep_en) {
  require_weights(ma);
  require_weights(en);
  if (ma.size() != en.size()) {
    throw ContractError("fuse_weights: ma has " + std::to_string(ma.size()) + " frames, en has " +
                        std::to_string(en.size()));
  }
  Tensor a = dropout_with_mask(ma.values, keep_ma, dropout_p);
  Tensor b = dropout_with_mask(en.values, keep_en, dropout_p);
  return {Stream::kMix, add(a, b), ma.frame_shift_ms};
}

WeightSequence fuse_weights(const WeightSequence& ma, const WeightSequence& en, double dropout_p,
                            Mode mode, std::uint64_t seed) {
  require_weights(ma);
  require_weights(en);
  if (ma.size() != en.size()) {
    throw ContractError("fuse_weights: ma has " + std::to_string(ma.size()) + " frames, en has " +
                        std::to_string(en.size()));
  }
  if (dropout_p < 0.0 || dropout_p >= 1.0) {
    throw ContractError("fuse_weights: dropout must lie in [0, 1)");
  }
  if (mode == Mode::kEval || dropout_p == 0.0) {
    return {Stream::kMix, add(ma.values, en.values), ma.frame_shift_ms};
  }
  auto keep_ma = dropout_mask(ma.size(), dropout_p, seed);
  auto keep_en = dropout_mask(en.size(), dropout_p, derive_seed(seed, 1));
  return fuse_weights_with_masks(ma, en, dropout_p, keep_ma, keep_en);
}

WeightSequence scale_weights(const WeightSequence& w, std::size_t target_count) {
  require_weights(w);
  if (target_count == 0) return {w.stream, scale(w.values, 0.0), w.frame_shift_ms};
  Tensor total = sum(w.values);
  if (!(total.item() > 0.0)) {
    throw NumericalError(std::string("scale_weights/") + std::string(stream_name(w.stream)),
                         "degenerate weights: stream " + std::string(stream_name(w.stream)) +
                             " sums to " + std::to_string(total.item()) + " but " +
                             std::to_string(target_count) + " tokens are expected");
  }
  Tensor factor = div(Tensor::scalar(static_cast<double>(target_count)), total);
  return {w.stream, mul(w.values, factor), w.frame_shift_ms};
}

FiringResult integrate_and_fire(const Tensor& h, const WeightSequence& w, const FiringConfig& cfg,
                                Mode mode) {
  require_weights(w);
  if (h.rank() != 2) throw DimensionError("integrate_and_fire: h must be a [T', D] matrix");
  const std::size_t frames = h.rows();
  const std::size_t dim = h.cols();
  if (w.size() != frames) {
    throw ContractError("integrate_and_fire: " + std::to_string(w.size()) + " weights for " +
                        std::to_string(frames) + " frames");
  }
  if (!(cfg.beta > 0.0)) throw ContractError("integrate_and_fire: beta must be positive");
  auto alpha = w.values.data();
  for (double a : alpha) {
    if (!(a >= 0.0)) throw ContractError("integrate_and_fire: weights must be non-negative");
  }
  const double beta = cfg.beta;

  std::vector<double> prefix(frames);
  double running = 0.0;
  for (std::size_t t = 0; t < frames; ++t) prefix[t] = running += alpha[t];

  // In-loop fires.
  std::vector<std::size_t> boundaries;
  for (std::size_t t = 0; t < frames; ++t) {
    while (prefix[t] >= static_cast<double>(boundaries.size() + 1) * beta) boundaries.push_back(t);
  }
  const std::size_t in_loop = boundaries.size();
  const double end_mass = frames ? prefix.back() : 0.0;
  double residual = std::max(0.0, end_mass - static_cast<double>(in_loop) * beta);

  bool tail = false;
  if (frames > 0 && residual > 0.0) {
    if (mode == Mode::kTrain) {
      tail = residual >= beta * (1.0 - kTrainTailSlack);
    } else {
      tail = residual >= cfg.tail_threshold;
    }
  }
  double tail_scale = 1.0;
  if (tail) {
    boundaries.push_back(frames - 1);
    if (mode == Mode::kEval && cfg.normalize_tail) tail_scale = beta / residual;
  }
  const std::size_t tokens = boundaries.size();
  const bool scaled_tail = tail && tail_scale != 1.0;

  // Overlaps between frame mass intervals and token mass intervals.
  std::vector<Portion> portions;
  std::size_t first = 0;  // token that owns the start of frame t
  for (std::size_t t = 0; t < frames && first < tokens; ++t) {
    const double lo = t ? prefix[t - 1] : 0.0;
    const double hi = prefix[t];
    std::size_t k = first;
    for (; k < tokens; ++k) {
      const double k_lo = static_cast<double>(k) * beta;
      const double k_hi = static_cast<double>(k + 1) * beta;
      if (k_lo >= hi) break;
      const bool upper = hi < k_hi;
      const bool lower = t > 0 && lo > k_lo;
      const double a = (upper ? hi : k_hi) - (lower ? lo : k_lo);
      if (a > 0.0) portions.push_back({k, t, a, upper, lower});
      if (hi < k_hi) break;
    }
    // Tokens completed up to and including frame t.
    while (first < tokens && first < in_loop && boundaries[first] <= t) ++first;
  }

  auto H = h.data();
  std::vector<double> out(tokens * dim, 0.0);
  for (const auto& p : portions) {
    const double s = (scaled_tail && p.token == tokens - 1) ? tail_scale : 1.0;
    const double* hrow = H.data() + p.frame * dim;
    double* crow = out.data() + p.token * dim;
    for (std::size_t d = 0; d < dim; ++d) crow[d] += s * p.weight * hrow[d];
  }

  FiringResult result;
  result.boundaries = boundaries;
  result.residual_weight = tail ? 0.0 : residual;
  result.embeddings = make_result(
      {tokens, dim}, std::move(out), {h, w.values},
      [portions = std::move(portions), frames, dim, tokens, scaled_tail, tail_scale, residual,
       beta](Node& self) {
        Node& ph = *self.parents[0];
        Node& pw = *self.parents[1];
        const double* G = self.grad.data();
        auto token_scale = [&](std::size_t k) {
          return (scaled_tail && k == tokens - 1) ? tail_scale : 1.0;
        };
        if (ph.requires_grad) {
          auto& gh = grad_buffer(ph);
          for (const auto& p : portions) {
            const double s = token_scale(p.token) * p.weight;
            for (std::size_t d = 0; d < dim; ++d) gh[p.frame * dim + d] += s * G[p.token * dim + d];
          }
        }
        if (!pw.requires_grad) return;
        // dL/dS_t, then dL/dw_s = sum_{t >= s} dL/dS_t.
        std::vector<double> d_prefix(frames, 0.0);
        double d_tail_scale = 0.0;
        for (const auto& p : portions) {
          double dot = 0.0;
          for (std::size_t d = 0; d < dim; ++d)
            dot += G[p.token * dim + d] * ph.value[p.frame * dim + d];
          if (scaled_tail && p.token == tokens - 1) d_tail_scale += dot * p.weight;
          const double da = token_scale(p.token) * dot;
          if (p.upper_binding) d_prefix[p.frame] += da;
          if (p.lower_binding) d_prefix[p.frame - 1] -= da;
        }
        if (scaled_tail) {
          // tail_scale = beta / (S_end - n*beta)
          d_prefix[frames - 1] += d_tail_scale * (-beta / (residual * residual));
        }
        auto& gw = grad_buffer(pw);
        double acc = 0.0;
        for (std::size_t s = frames; s-- > 0;) {
          acc += d_prefix[s];
          gw[s] += acc;
        }
      });
  return result;
}

BoundarySet boundaries_to_ms(std::span<const std::size_t> boundaries, double frame_shift_ms) {
  if (!(frame_shift_ms > 0.0)) throw ContractError("boundaries_to_ms: frame shift must be > 0");
  BoundarySet out;
  out.times_ms.reserve(boundaries.size());
  for (auto b : boundaries) out.times_ms.push_back(static_cast<double>(b) * frame_shift_ms);
  return out;
}

BoundarySet boundaries_to_ms(const FiringResult& r, double frame_shift_ms) {
  return boundaries_to_ms(r.boundaries, frame_shift_ms);
}

std::vector<int> fired_per_frame(std::span<const std::size_t> boundaries, std::size_t frames) {
  std::vector<int> out(frames, 0);
  for (auto b : boundaries) {
    if (b >= frames) throw ContractError("fired_per_frame: boundary beyond last frame");
    ++out[b];
  }
  return out;
}

void write_trace_csv(std::ostream& os, const AlignmentTrace& trace) {
  const std::size_t n = trace.alpha_mix.size();
  auto check = [n](std::size_t m) {
    if (m != n) throw ContractError("alignment trace columns differ in length");
  };
  check(trace.alpha_ma.size());
  check(trace.alpha_en.size());
  check(trace.fired_ma.size());
  check(trace.fired_en.size());
  check(trace.fired_mix.size());
  check(trace.gold.size());
  os << "frame,alpha_ma,alpha_en,alpha_mix,fired_ma,fired_en,fired_mix,gold\n";
  os << std::setprecision(17);
  for (std::size_t t = 0; t < n; ++t) {
    os << t << ',' << trace.alpha_ma[t] << ',' << trace.alpha_en[t] << ',' << trace.alpha_mix[t]
       << ',' << trace.fired_ma[t] << ',' << trace.fired_en[t] << ',' << trace.fired_mix[t] << ','
       << trace.gold[t] << '\n';
  }
}

}  // namespace cif
