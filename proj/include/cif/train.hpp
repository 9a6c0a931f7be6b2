// cif/train.hpp

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

// Optimizer, learning-rate schedule and the per-step update.

#ifndef CIF_TRAIN_HPP_
#define CIF_TRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cif/losses.hpp"
#include "cif/model.hpp"
#include "cif/synthdata.hpp"

namespace cif {

// Linear warmup from 0 to peak, hold, linear decay to final, then final.
// Steps are 1-based.
struct Schedule {
  double peak_lr = 2e-3;
  double final_lr = 2e-4;
  std::size_t warmup_steps = 100;
  std::size_t hold_steps = 900;
  std::size_t decay_steps = 1000;

  double at(std::size_t step) const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg = {});

  // p -= lr * mhat / (sqrt(vhat) + eps) using each parameter's grad.
  void step(double lr);
  std::size_t steps_taken() const { return t_; }

  // Moments as named tensors ("m.<i>", "v.<i>") plus the step count.
  std::vector<NamedTensor> state() const;
  void load_state(const std::vector<NamedTensor>& state);

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 8;
  Schedule schedule;
  AdamConfig adam;
  // Global gradient-norm cap; 0 disables clipping.
  double grad_clip = 5.0;
  // Worker threads for the utterances of one batch.
  std::size_t threads = 1;
  // Each training utterance is resampled in time by a factor drawn
  // uniformly from [1 - s, 1 + s]; 0 disables.
  double speed_perturb = 0.0;
};

struct StepStats {
  LossBundle mean;  // batch-averaged loss terms
  double lr = 0.0;
  double grad_norm = 0.0;  // before clipping
};

// Nearest-frame time resampling to round(T * factor) frames, at least
// `min_frames`.
Tensor resample_frames(const Tensor& features, double factor, std::size_t min_frames = kDownsample);

// Utterance indices of batch `step` (1-based): epochs are seeded random
// permutations of the corpus laid end to end, so any step can be located
// without replaying earlier ones.
std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t corpus_size,
                                       std::size_t batch_size, std::size_t step);

// One optimizer step over `batch`. Per-utterance gradients are collected
// separately and summed in batch order, so the result does not depend on
// `cfg.threads`. Throws NumericalError naming a non-finite loss term.
StepStats train_step(CifModel& model, Adam& adam, std::span<const SynthUtterance* const> batch,
                     const TrainConfig& cfg, std::uint64_t seed, std::size_t step);

}  // namespace cif

#endif  // CIF_TRAIN_HPP_
