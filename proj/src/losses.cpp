// src/losses.cpp

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

#include "cif/losses.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include "cif/errors.hpp"

namespace cif {

namespace {

using detail::Node;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

Tensor count_gap(const WeightSequence& w, std::size_t target) {
  return abs(add_scalar(scale(sum(w.values), -1.0), static_cast<double>(target)));
}

void log_softmax_rows(std::span<const double> x, std::size_t rows, std::size_t cols,
                      std::vector<double>& out) {
  out.resize(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* r = x.data() + i * cols;
    const double mx = *std::max_element(r, r + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += std::exp(r[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = r[j] - lse;
  }
}

}  // namespace

Tensor quantity_loss(const WeightSequence& ma, const WeightSequence& en, const WeightSequence& mix,
                     const QuantityTargets& targets) {
  Tensor mono = add(count_gap(ma, targets.u_ma), count_gap(en, targets.u_en));
  return add(count_gap(mix, targets.u_mix), scale(mono, 0.5));
}

Tensor quantity_loss_mix_only(const WeightSequence& mix, std::size_t u_mix) {
  return count_gap(mix, u_mix);
}

Tensor cross_entropy(const Tensor& logits, std::span<const TokenId> targets) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy: logits must be [U, V]");
  const std::size_t rows = logits.rows(), v = logits.cols();
  if (rows != targets.size()) {
    throw ContractError("cross_entropy: " + std::to_string(rows) + " logit rows for " +
                        std::to_string(targets.size()) + " targets");
  }
  for (TokenId y : targets) {
    if (y < 0 || static_cast<std::size_t>(y) >= v) {
      throw ContractError("cross_entropy: target " + std::to_string(y) + " outside " +
                          std::to_string(v) + " classes");
    }
  }
  std::vector<double> lp;
  log_softmax_rows(logits.data(), rows, v, lp);
  double loss = 0.0;
  for (std::size_t t = 0; t < rows; ++t) loss -= lp[t * v + static_cast<std::size_t>(targets[t])];
  std::vector<TokenId> ys(targets.begin(), targets.end());
  return make_result({}, {loss}, {logits},
                     [lp = std::move(lp), ys = std::move(ys), v](Node& self) {
                       auto& g = grad_buffer(*self.parents[0]);
                       const double s = self.grad[0];
                       for (std::size_t t = 0; t < ys.size(); ++t) {
                         for (std::size_t j = 0; j < v; ++j) g[t * v + j] += s * std::exp(lp[t * v + j]);
                         g[t * v + static_cast<std::size_t>(ys[t])] -= s;
                       }
                     });
}

Tensor nar_ce_loss(const Tensor& ma_logits, std::span<const TokenId> ma_targets,
                   const Tensor& en_logits, std::span<const TokenId> en_targets) {
  Tensor total = Tensor::scalar(0.0);
  if (!ma_targets.empty()) total = add(total, cross_entropy(ma_logits, ma_targets));
  if (!en_targets.empty()) total = add(total, cross_entropy(en_logits, en_targets));
  return total;
}

Tensor lcd_bce_loss(const Tensor& probs, const LanguageChangeTargets& targets) {
  if (probs.numel() != targets.flags.size()) {
    throw ContractError("lcd_bce_loss: " + std::to_string(probs.numel()) + " probabilities for " +
                        std::to_string(targets.flags.size()) + " targets");
  }
  auto P = probs.data();
  double loss = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double p = std::clamp(P[i], kBceClamp, 1.0 - kBceClamp);
    const double l = targets.flags[i];
    loss -= l * std::log(p) + (1.0 - l) * std::log(1.0 - p);
  }
  return make_result({}, {loss}, {probs}, [flags = targets.flags](Node& self) {
    Node& pp = *self.parents[0];
    auto& g = grad_buffer(pp);
    for (std::size_t i = 0; i < flags.size(); ++i) {
      const double p = pp.value[i];
      if (p < kBceClamp || p > 1.0 - kBceClamp) continue;
      const double l = flags[i];
      g[i] += self.grad[0] * (-l / p + (1.0 - l) / (1.0 - p));
    }
  });
}

std::size_t ctc_min_frames(std::span<const TokenId> targets) {
  std::size_t n = targets.size();
  for (std::size_t i = 1; i < targets.size(); ++i) n += targets[i] == targets[i - 1];
  return n;
}

Tensor ctc_loss(const Tensor& logits, std::span<const TokenId> targets, TokenId blank) {
  if (logits.rank() != 2) throw DimensionError("ctc_loss: logits must be [T', V+1]");
  const std::size_t frames = logits.rows(), classes = logits.cols();
  if (blank < 0 || static_cast<std::size_t>(blank) >= classes) {
    throw ContractError("ctc_loss: blank id " + std::to_string(blank) + " outside " +
                        std::to_string(classes) + " classes");
  }
  for (TokenId y : targets) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes || y == blank) {
      throw ContractError("ctc_loss: invalid target id " + std::to_string(y));
    }
  }
  const std::size_t need = ctc_min_frames(targets);
  if (frames < need || (frames == 0 && !targets.empty())) {
    throw InfeasibleAlignmentError("ctc_loss: " + std::to_string(targets.size()) +
                                   " labels need " + std::to_string(need) + " frames, have " +
                                   std::to_string(frames));
  }
  if (frames == 0) return make_result({}, {0.0}, {logits}, [](Node&) {});

  // Blank-interleaved extended label sequence.
  const std::size_t ext = 2 * targets.size() + 1;
  std::vector<std::size_t> label(ext);
  for (std::size_t s = 0; s < ext; ++s) {
    label[s] = s % 2 == 0 ? static_cast<std::size_t>(blank)
                          : static_cast<std::size_t>(targets[s / 2]);
  }
  auto can_skip = [&](std::size_t s) {  // s-2 -> s allowed
    return s >= 2 && label[s] != static_cast<std::size_t>(blank) && label[s] != label[s - 2];
  };

  std::vector<double> lp;
  log_softmax_rows(logits.data(), frames, classes, lp);
  auto emit = [&](std::size_t t, std::size_t s) { return lp[t * classes + label[s]]; };

  std::vector<double> alpha(frames * ext, kNegInf), beta(frames * ext, kNegInf);
  alpha[0] = emit(0, 0);
  if (ext > 1) alpha[1] = emit(0, 1);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < ext; ++s) {
      double a = alpha[(t - 1) * ext + s];
      if (s >= 1) a = log_add(a, alpha[(t - 1) * ext + s - 1]);
      if (can_skip(s)) a = log_add(a, alpha[(t - 1) * ext + s - 2]);
      alpha[t * ext + s] = a == kNegInf ? kNegInf : a + emit(t, s);
    }
  }
  const std::size_t last = frames - 1;
  beta[last * ext + ext - 1] = emit(last, ext - 1);
  if (ext > 1) beta[last * ext + ext - 2] = emit(last, ext - 2);
  for (std::size_t t = last; t-- > 0;) {
    for (std::size_t s = 0; s < ext; ++s) {
      double b = beta[(t + 1) * ext + s];
      if (s + 1 < ext) b = log_add(b, beta[(t + 1) * ext + s + 1]);
      if (s + 2 < ext && can_skip(s + 2)) b = log_add(b, beta[(t + 1) * ext + s + 2]);
      beta[t * ext + s] = b == kNegInf ? kNegInf : b + emit(t, s);
    }
  }
  double log_z = alpha[last * ext + ext - 1];
  if (ext > 1) log_z = log_add(log_z, alpha[last * ext + ext - 2]);
  if (log_z == kNegInf) throw InfeasibleAlignmentError("ctc_loss: no valid path");

  // Occupancy of each class at each frame: sum over s with label[s] == v of
  // exp(alpha + beta - emit - log_z).
  std::vector<double> occupancy(frames * classes, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t s = 0; s < ext; ++s) {
      const double a = alpha[t * ext + s], b = beta[t * ext + s];
      if (a == kNegInf || b == kNegInf) continue;
      occupancy[t * classes + label[s]] += std::exp(a + b - emit(t, s) - log_z);
    }
  }
  return make_result({}, {-log_z}, {logits},
                     [lp = std::move(lp), occupancy = std::move(occupancy)](Node& self) {
                       auto& g = grad_buffer(*self.parents[0]);
                       const double s = self.grad[0];
                       for (std::size_t i = 0; i < g.size(); ++i)
                         g[i] += s * (std::exp(lp[i]) - occupancy[i]);
                     });
}

CombinedLoss combine(const LossTerms& terms, const LossWeights& weights) {
  struct Entry {
    const char* name;
    const Tensor* tensor;
    double lambda;
    double* slot;
  };
  CombinedLoss out;
  LossBundle& b = out.bundle;
  const Entry entries[] = {
      {"ar_ce", &terms.ar_ce, 1.0, &b.ar_ce},
      {"ctc", &terms.ctc, weights.lambda_ctc, &b.ctc},
      {"quantity", &terms.quantity, weights.lambda_qua, &b.quantity},
      {"nar_ce", &terms.nar_ce, weights.lambda_nar, &b.nar_ce},
      {"lcd_bce", &terms.lcd_bce, weights.lambda_lcd, &b.lcd_bce},
  };
  Tensor total;
  for (const auto& e : entries) {
    if (!e.tensor->defined()) continue;
    const double v = e.tensor->item();
    if (!std::isfinite(v)) {
      throw NumericalError(e.name, std::string("non-finite loss term ") + e.name + " = " +
                                       std::to_string(v));
    }
    *e.slot = v;
    Tensor weighted = e.lambda == 1.0 ? *e.tensor : scale(*e.tensor, e.lambda);
    total = total.defined() ? add(total, weighted) : weighted;
  }
  if (!total.defined()) total = Tensor::scalar(0.0);
  b.total = total.item();
  out.total = total;
  return out;
}

void write_loss_log_header(std::ostream& os) {
  os << "step\tar_ce\tctc\tquantity\tnar_ce\tlcd_bce\ttotal\n";
}

void write_loss_log_record(std::ostream& os, std::size_t step, const LossBundle& b) {
  os << step << std::setprecision(10) << '\t' << b.ar_ce << '\t' << b.ctc << '\t' << b.quantity
     << '\t' << b.nar_ce << '\t' << b.lcd_bce << '\t' << b.total << '\n';
}

}  // namespace cif
