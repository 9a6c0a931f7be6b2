// src/train.cpp

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

#include "cif/train.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include "cif/errors.hpp"
#include "cif/random.hpp"

namespace cif {

double Schedule::at(std::size_t step) const {
  if (step <= warmup_steps) {
    return peak_lr * static_cast<double>(step) / static_cast<double>(std::max<std::size_t>(warmup_steps, 1));
  }
  step -= warmup_steps;
  if (step <= hold_steps) return peak_lr;
  step -= hold_steps;
  if (step >= decay_steps) return final_lr;
  const double f = static_cast<double>(step) / static_cast<double>(decay_steps);
  return peak_lr + (final_lr - peak_lr) * f;
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    auto g = p.mutable_grad();
    auto w = p.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg_.eps);
    }
  }
}

std::vector<NamedTensor> Adam::state() const {
  std::vector<NamedTensor> out;
  out.push_back({"step", Tensor::scalar(static_cast<double>(t_))});
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.push_back({"m." + std::to_string(i), Tensor::from(params_[i].shape(), m_[i])});
    out.push_back({"v." + std::to_string(i), Tensor::from(params_[i].shape(), v_[i])});
  }
  return out;
}

void Adam::load_state(const std::vector<NamedTensor>& state) {
  if (state.size() != 1 + 2 * params_.size() || state[0].name != "step") {
    throw DataError("optimizer state does not match the model");
  }
  t_ = static_cast<std::size_t>(state[0].tensor.item());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& m = state[1 + 2 * i];
    const auto& v = state[2 + 2 * i];
    if (m.tensor.shape() != params_[i].shape() || v.tensor.shape() != params_[i].shape()) {
      throw DataError("optimizer state shape mismatch at parameter " + std::to_string(i));
    }
    m_[i].assign(m.tensor.data().begin(), m.tensor.data().end());
    v_[i].assign(v.tensor.data().begin(), v.tensor.data().end());
  }
}

Tensor resample_frames(const Tensor& features, double factor, std::size_t min_frames) {
  if (features.rank() != 2) throw DimensionError("resample_frames: expected [T, F] features");
  if (!(factor > 0.0)) throw ContractError("resample_frames: factor must be positive");
  const std::size_t t0 = features.rows(), f = features.cols();
  const std::size_t t = std::max<std::size_t>(
      min_frames, static_cast<std::size_t>(std::lround(static_cast<double>(t0) * factor)));
  auto src = features.data();
  std::vector<double> out(t * f);
  for (std::size_t j = 0; j < t; ++j) {
    const std::size_t from =
        std::min(t0 - 1, static_cast<std::size_t>(static_cast<double>(j) / factor));
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from * f), f,
                out.begin() + static_cast<std::ptrdiff_t>(j * f));
  }
  return Tensor::matrix(t, f, out);
}

std::vector<std::size_t> batch_indices(std::uint64_t seed, std::size_t corpus_size,
                                       std::size_t batch_size, std::size_t step) {
  if (corpus_size == 0 || batch_size == 0 || step == 0) {
    throw ContractError("batch_indices: empty corpus, zero batch or step 0");
  }
  std::vector<std::size_t> out;
  std::size_t epoch = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> perm(corpus_size);
  const std::size_t first = (step - 1) * batch_size;
  for (std::size_t k = first; k < first + batch_size; ++k) {
    const std::size_t e = k / corpus_size;
    if (e != epoch) {
      epoch = e;
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::mt19937_64 rng(derive_seed(derive_seed(seed, 0xba7c4), e));
      // Fisher-Yates with explicit draws; std::shuffle's algorithm is
      // implementation-defined.
      for (std::size_t i = corpus_size; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(perm[i - 1], perm[j]);
      }
    }
    out.push_back(perm[k % corpus_size]);
  }
  return out;
}

StepStats train_step(CifModel& model, Adam& adam, std::span<const SynthUtterance* const> batch,
                     const TrainConfig& cfg, std::uint64_t seed, std::size_t step) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  const std::size_t n = batch.size();
  std::vector<GradientSink> sinks(n);
  std::vector<LossBundle> bundles(n);
  std::vector<std::exception_ptr> errors(n);
  const std::uint64_t step_seed = derive_seed(seed, step);

  auto run = [&](std::size_t i) {
    try {
      ScopedGradientSink scope(sinks[i]);
      const std::uint64_t utt_seed = derive_seed(step_seed, i);
      Tensor x = batch[i]->features;
      if (cfg.speed_perturb > 0.0) {
        std::mt19937_64 rng(derive_seed(utt_seed, 0x5eed));
        std::uniform_real_distribution<double> u(1.0 - cfg.speed_perturb, 1.0 + cfg.speed_perturb);
        x = resample_frames(x, u(rng));
      }
      TrainForward f = model.forward_train(x, batch[i]->transcript, utt_seed);
      bundles[i] = f.loss.bundle;
      backward(f.loss.total);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(cfg.threads, 1, n);
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += threads) run(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  ParameterStore& params = model.params();
  params.zero_grad();
  const std::vector<Tensor> all = params.tensors();
  for (const auto& s : sinks) s.flush_into(all);

  const double inv = 1.0 / static_cast<double>(n);
  double sq = 0.0;
  for (auto p : all) {
    if (!p.has_grad()) continue;
    for (double& g : p.mutable_grad()) {
      g *= inv;
      sq += g * g;
    }
  }
  StepStats stats;
  stats.grad_norm = std::sqrt(sq);
  if (!std::isfinite(stats.grad_norm)) throw NumericalError("gradient", "non-finite gradient norm");
  if (cfg.grad_clip > 0.0 && stats.grad_norm > cfg.grad_clip) {
    const double f = cfg.grad_clip / stats.grad_norm;
    for (auto p : all) {
      if (!p.has_grad()) continue;
      for (double& g : p.mutable_grad()) g *= f;
    }
  }
  stats.lr = cfg.schedule.at(step);
  adam.step(stats.lr);

  for (const auto& b : bundles) {
    stats.mean.ar_ce += b.ar_ce * inv;
    stats.mean.ctc += b.ctc * inv;
    stats.mean.quantity += b.quantity * inv;
    stats.mean.nar_ce += b.nar_ce * inv;
    stats.mean.lcd_bce += b.lcd_bce * inv;
    stats.mean.total += b.total * inv;
  }
  return stats;
}

}  // namespace cif
