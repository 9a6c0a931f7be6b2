// tests/test_model.cpp

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

#include <cmath>
#include <filesystem>
#include <random>

#include "cif/checkpoint.hpp"
#include "cif/errors.hpp"
#include "cif/model.hpp"
#include "doctest.h"

using namespace cif;
namespace fs = std::filesystem;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.n_ma = 4;
  c.n_en = 4;
  c.feat_dim = 3;
  c.d_model = 8;
  c.ffn_dim = 16;
  c.estimator_filters = 6;
  c.max_tokens = 32;
  return c;
}

Tensor random_features(std::size_t frames, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> v(frames * dim);
  for (auto& x : v) x = n(rng);
  return Tensor::matrix(frames, dim, v);
}

Tensor random_embeddings(std::size_t u, std::size_t d, std::uint64_t seed) {
  return random_features(u, d, seed);
}

std::vector<double> vals(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

BilingualTranscript transcript(const Vocabulary& v, std::vector<int> ids) {
  TokenSequence t;
  for (int i : ids) t.push_back(i < 0 ? v.en_id(static_cast<std::size_t>(-i - 1)) : v.ma_id(static_cast<std::size_t>(i)));
  t.push_back(Vocabulary::kEos);
  return make_transcript(t, v);
}

double sequence_log_prob(const CifModel& m, const Tensor& c, const TokenSequence& y) {
  double lp = 0;
  TokenSequence prefix{Vocabulary::kSos};
  for (std::size_t i = 0; i < y.size(); ++i) {
    Tensor l = log_softmax(m.ar_decode_step(slice_rows(c, 0, i + 1), prefix));
    lp += l.at(static_cast<std::size_t>(y[i]));
    prefix.push_back(y[i]);
  }
  return lp;
}

// Best complete hypothesis over every token sequence: ending in </s> at or
// before position U, or reaching U tokens without it.
Hypothesis exhaustive_search(const CifModel& m, const Tensor& c) {
  const std::size_t u = c.rows(), v = m.vocab().size();
  Hypothesis best;
  best.log_prob = -INFINITY;
  std::vector<TokenSequence> frontier{{}};
  for (std::size_t len = 1; len <= u; ++len) {
    std::vector<TokenSequence> next;
    for (const auto& p : frontier) {
      for (TokenId id = 1; id < static_cast<TokenId>(v); ++id) {
        TokenSequence y = p;
        y.push_back(id);
        if (id == Vocabulary::kEos || len == u) {
          const double lp = sequence_log_prob(m, c, y);
          if (lp > best.log_prob || (lp == best.log_prob && y < best.tokens)) best = {y, lp};
        }
        if (id != Vocabulary::kEos) next.push_back(y);
      }
    }
    frontier = std::move(next);
  }
  return best;
}

}  // namespace

TEST_CASE("config validation") {
  auto c = small_config();
  c.d_model = 9;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = small_config();
  c.estimator_kernels = {3, 2};
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = small_config();
  c.dropout = 1.0;
  CHECK_THROWS_AS(CifModel(c, 1), ConfigError);
}

TEST_CASE("encoder downsamples by four") {
  CifModel m(small_config(), 1);
  CHECK(m.encode(random_features(16, 3, 1)).rows() == 4);
  CHECK(m.encode(random_features(17, 3, 1)).rows() == 5);
  CHECK(m.encode(random_features(4, 3, 1)).rows() == 1);
  CHECK_THROWS_AS(m.encode(random_features(3, 3, 1)), ContractError);
  CHECK_THROWS_AS(m.encode(random_features(8, 2, 1)), DimensionError);
}

TEST_CASE("zeroed residual blocks reduce the encoder to the pooled front end") {
  CifModel m(small_config(), 2);
  for (const auto& n : m.params().names()) {
    if (n.rfind("enc.block", 0) == 0) {
      for (double& x : m.params().get(n).mutable_data()) x = 0.0;
    }
  }
  Tensor x = random_features(22, 3, 2);
  Tensor front = relu(conv1d(x, m.params().get("enc.in.w"), m.params().get("enc.in.b"), 3));
  CHECK(vals(m.encode(x)) == vals(max_pool_rows(subsample_rows(front, 2), 2)));
}

TEST_CASE("estimators give values in (0, 1) and differ between languages") {
  CifModel m(small_config(), 3);
  Tensor h = m.encode(random_features(40, 3, 3));
  auto a = m.estimate_weights(h, Estimator::kMa), b = m.estimate_weights(h, Estimator::kEn);
  for (double x : a.values.data()) CHECK((x > 0 && x < 1));
  CHECK(a.size() == h.rows());
  CHECK(vals(a.values) != vals(b.values));
  CHECK(a.stream == Stream::kMa);
  CHECK(a.frame_shift_ms == 40.0);
  CHECK_THROWS_AS(m.estimate_weights(h, Estimator::kShared), ContractError);
}

TEST_CASE("without LSWE the shared stream drives firing") {
  auto c = small_config();
  c.use_lswe = false;
  CifModel m(c, 4);
  auto r = m.infer(random_features(40, 3, 4), 2);
  CHECK_FALSE(r.alpha_ma.values.defined());
  CHECK(vals(r.alpha_mix.values) == vals(m.estimate_weights(m.encode(random_features(40, 3, 4)), Estimator::kShared).values));
  for (const auto& n : m.params().names()) CHECK(n.rfind("est.ma", 0) != 0);
}

TEST_CASE("autoregressive decoder shape, causality and incremental equivalence") {
  CifModel m(small_config(), 5);
  const std::size_t u = 4, v = m.vocab().size();
  Tensor c = random_embeddings(u, 8, 5);
  const TokenId y[] = {0, 3, 7, 1};
  Tensor full = m.ar_decode(c, y);
  CHECK(full.rows() == u);
  CHECK(full.cols() == v);
  const TokenId y2[] = {0, 3, 5, 1};
  Tensor changed = m.ar_decode(c, y2);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t k = 0; k < v; ++k) CHECK(changed.at(t, k) == full.at(t, k));
  CHECK(vals(changed) != vals(full));
  for (std::size_t t = 0; t < u; ++t) {
    Tensor step = m.ar_decode_step(slice_rows(c, 0, t + 1), std::span<const TokenId>(y, t + 1));
    for (std::size_t k = 0; k < v; ++k) CHECK(step.at(k) == doctest::Approx(full.at(t, k)).epsilon(1e-12));
  }
}

TEST_CASE("non-autoregressive decoder sees every position") {
  CifModel m(small_config(), 6);
  Tensor c = random_embeddings(3, 8, 6);
  Tensor out = m.nar_decode(c);
  CHECK(out.rows() == 3);
  auto cv = vals(c);
  cv[2 * 8] += 0.5;  // perturb the last position only
  Tensor out2 = m.nar_decode(Tensor::matrix(3, 8, cv));
  CHECK(out2.at(0, 0) != out.at(0, 0));
}

TEST_CASE("language change detector outputs one probability per token") {
  CifModel m(small_config(), 7);
  Tensor c = random_embeddings(5, 8, 7);
  const TokenId y[] = {0, 2, 3, 7, 8};
  Tensor p = m.lcd_forward(c, y);
  CHECK(p.numel() == 5);
  for (double x : p.data()) CHECK((x > 0 && x < 1));
}

TEST_CASE("every parameter receives gradient") {
  CifModel m(small_config(), 8);
  const auto v = m.vocab();
  for (std::size_t i = 0; i < 4; ++i) {
    auto t = transcript(v, {0, 1, -1, -2, 2, -3});
    backward(m.forward_train(random_features(72, 3, 10 + i), t, i).loss.total);
  }
  for (const auto& n : m.params().names()) {
    double s = 0;
    for (double g : m.params().get(n).grad()) s += std::abs(g);
    INFO(n);
    CHECK(s > 0);
  }
}

TEST_CASE("zero auxiliary weights give the cross-entropy-only gradients") {
  auto c = small_config();
  c.loss = {0, 0, 0, 0};
  CifModel a(c, 9);
  auto d = c;
  d.use_nar = d.use_lcd = false;
  CifModel b(d, 9);
  const auto t = transcript(a.vocab(), {0, -1, 1});
  Tensor x = random_features(48, 3, 9);
  backward(a.forward_train(x, t, 5).loss.total);
  backward(b.forward_train(x, t, 5).loss.total);
  for (const auto& n : b.params().names()) {
    if (n.rfind("ctc.", 0) == 0) continue;
    auto ga = a.params().get(n).grad(), gb = b.params().get(n).grad();
    for (std::size_t i = 0; i < ga.size(); ++i) CHECK(ga[i] == doctest::Approx(gb[i]).epsilon(1e-12));
  }
}

TEST_CASE("forward_train is deterministic per seed") {
  CifModel m(small_config(), 10);
  const auto t = transcript(m.vocab(), {0, -1});
  Tensor x = random_features(40, 3, 11);
  CHECK(m.forward_train(x, t, 3).loss.bundle.total == m.forward_train(x, t, 3).loss.bundle.total);
  CHECK(m.forward_train(x, t, 3).loss.bundle.total != m.forward_train(x, t, 4).loss.bundle.total);
}

TEST_CASE("beam width one is greedy decoding") {
  CifModel m(small_config(), 11);
  Tensor c = random_embeddings(4, 8, 11);
  TokenSequence y, prefix{Vocabulary::kSos};
  for (std::size_t i = 0; i < 4; ++i) {
    Tensor l = m.ar_decode_step(slice_rows(c, 0, i + 1), prefix);
    TokenId best = 1;
    for (TokenId k = 1; k < static_cast<TokenId>(l.numel()); ++k)
      if (l.at(static_cast<std::size_t>(k)) > l.at(static_cast<std::size_t>(best))) best = k;
    y.push_back(best);
    prefix.push_back(best);
    if (best == Vocabulary::kEos) break;
  }
  CHECK(m.beam_search(c, 1).tokens == y);
}

TEST_CASE("beam of vocabulary width finds the exhaustive optimum") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    CifModel m(small_config(), 20 + seed);
    for (std::size_t u = 1; u <= 2; ++u) {
      Tensor c = random_embeddings(u, 8, 30 + seed);
      const auto want = exhaustive_search(m, c);
      const auto got = m.beam_search(c, m.vocab().size());
      CHECK(got.tokens == want.tokens);
      CHECK(got.log_prob == doctest::Approx(want.log_prob).epsilon(1e-12));
    }
  }
}

TEST_CASE("best score does not decrease with beam width") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CifModel m(small_config(), 40 + seed);
    Tensor c = random_embeddings(5, 8, 50 + seed);
    double prev = -INFINITY;
    for (std::size_t b : {1, 2, 4, 10}) {
      const double lp = m.beam_search(c, b).log_prob;
      CHECK(lp >= prev - 1e-12);
      prev = lp;
    }
  }
}

TEST_CASE("auxiliary modules do not affect inference") {
  const fs::path path = fs::temp_directory_path() / "cif_model_aux.ckpt";
  CifModel full(small_config(), 12);
  full.save(path);
  auto c = small_config();
  c.use_nar = c.use_lcd = false;
  CifModel pruned(c, 99);
  pruned.load(path, false);
  CHECK(pruned.inference_parameter_count() == full.inference_parameter_count());
  for (std::uint64_t s = 0; s < 5; ++s) {
    Tensor x = random_features(60, 3, 60 + s);
    auto a = full.infer(x, 3), b = pruned.infer(x, 3);
    CHECK(a.best.tokens == b.best.tokens);
    CHECK(a.best.log_prob == b.best.log_prob);
    CHECK(a.boundaries == b.boundaries);
  }
}

TEST_CASE("checkpoint load checks names and shapes") {
  const fs::path dir = fs::temp_directory_path() / "cif_model_ckpt";
  fs::create_directories(dir);
  CifModel m(small_config(), 13);
  m.save(dir / "m.ckpt");
  CifModel n(small_config(), 14);
  n.load(dir / "m.ckpt", true);
  for (const auto& name : m.params().names()) {
    CHECK(vals(m.params().get(name)) == vals(n.params().get(name)));
  }
  auto tensors = load_tensors(dir / "m.ckpt");
  auto extra = tensors;
  extra.push_back({"enc.bogus", Tensor::scalar(1)});
  save_tensors(dir / "extra.ckpt", extra);
  CHECK_THROWS_AS(n.load(dir / "extra.ckpt", false), DataError);
  auto missing = tensors;
  missing.erase(missing.begin());
  save_tensors(dir / "missing.ckpt", missing);
  CHECK_THROWS_AS(n.load(dir / "missing.ckpt", false), DataError);
  auto c = small_config();
  c.d_model = 16;
  CifModel wide(c, 1);
  CHECK_THROWS_AS(wide.load(dir / "m.ckpt", false), DataError);
  std::vector<NamedTensor> inference_only;
  for (auto& t : tensors)
    if (t.name.rfind("nar.", 0) != 0 && t.name.rfind("lcd.", 0) != 0 && t.name.rfind("ctc.", 0) != 0)
      inference_only.push_back(t);
  save_tensors(dir / "inf.ckpt", inference_only);
  CHECK_NOTHROW(n.load(dir / "inf.ckpt", false));
  CHECK_THROWS_AS(n.load(dir / "inf.ckpt", true), DataError);
}
