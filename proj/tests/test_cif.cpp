// tests/test_cif.cpp

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

#include <random>
#include <sstream>

#include "cif/cif.hpp"
#include "cif/errors.hpp"
#include "cif/losses.hpp"
#include "doctest.h"
#include "gradcheck.hpp"

using namespace cif;

namespace {

WeightSequence ws(std::vector<double> v) { return {Stream::kMix, Tensor::vector(std::move(v)), 40.0}; }

std::vector<double> vals(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor eye3() { return Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1}); }

// Token-by-token accumulation, written independently of the prefix-sum
// implementation: integrate until the running sum reaches beta, split the
// crossing frame, and carry the remainder.
std::vector<std::vector<double>> naive_fire(const std::vector<std::vector<double>>& h,
                                            const std::vector<double>& w, double beta,
                                            std::vector<std::size_t>& boundaries) {
  std::vector<std::vector<double>> out;
  std::vector<double> acc(h[0].size(), 0.0);
  double mass = 0.0;
  for (std::size_t t = 0; t < w.size(); ++t) {
    double left = w[t];
    while (mass + left >= beta) {
      const double take = beta - mass;
      for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += take * h[t][d];
      out.push_back(acc);
      boundaries.push_back(t);
      acc.assign(acc.size(), 0.0);
      left -= take;
      mass = 0.0;
    }
    for (std::size_t d = 0; d < acc.size(); ++d) acc[d] += left * h[t][d];
    mass += left;
  }
  return out;
}

}  // namespace

TEST_CASE("fuse_weights without dropout and in eval mode is the plain sum") {
  auto m = fuse_weights(ws({0.2, 0.8}), ws({0.1, 0.0}), 0.0, Mode::kTrain, 3);
  CHECK(m.values.at(0) == doctest::Approx(0.3));
  CHECK(m.values.at(1) == doctest::Approx(0.8));
  auto e = fuse_weights(ws({0.2, 0.8}), ws({0.1, 0.0}), 0.7, Mode::kEval, 3);
  CHECK(vals(e.values) == vals(add(Tensor::vector({0.2, 0.8}), Tensor::vector({0.1, 0.0}))));
  CHECK(m.stream == Stream::kMix);
}

TEST_CASE("fuse_weights with a recorded mask") {
  const std::uint8_t keep_ma[] = {1, 0}, keep_en[] = {1, 1};
  auto m = fuse_weights_with_masks(ws({0.2, 0.8}), ws({0.1, 0.0}), 0.5, keep_ma, keep_en);
  CHECK(m.values.at(0) == doctest::Approx(0.6));
  CHECK(m.values.at(1) == doctest::Approx(0.0));
}

TEST_CASE("fuse_weights rejects streams of different length") {
  CHECK_THROWS_AS(fuse_weights(ws({0.1}), ws({0.1, 0.2}), 0.1, Mode::kEval, 0), ContractError);
}

TEST_CASE("scale_weights examples") {
  auto a = scale_weights(ws({0.5, 0.5, 0.5}), 2);
  for (double v : a.values.data()) CHECK(v == doctest::Approx(2.0 / 3.0));
  CHECK(a.total() == doctest::Approx(2.0));
  CHECK(vals(scale_weights(ws({0.3, 0.4}), 0).values) == std::vector<double>{0, 0});
  auto b = scale_weights(ws({0.1, 0.9}), 1);
  CHECK(b.values.at(0) == doctest::Approx(0.1));
  CHECK(b.values.at(1) == doctest::Approx(0.9));
  CHECK_THROWS_AS(scale_weights(ws({0.0, 0.0}), 1), NumericalError);
}

TEST_CASE("scaled weights leave the gradient orthogonal to the weights") {
  Tensor w = Tensor::parameter({4}, {0.3, 0.7, 0.2, 0.9});
  Tensor h = Tensor::matrix(4, 2, {1, 2, -1, 0.5, 3, 1, 0, -2});
  auto r = integrate_and_fire(h, scale_weights({Stream::kMix, w, 40.0}, 2), {}, Mode::kTrain);
  backward(sum(mul(r.embeddings, Tensor::matrix(2, 2, {1, -1, 0.5, 2}))));
  double dot = 0;
  for (std::size_t i = 0; i < 4; ++i) dot += w.grad()[i] * w.at(i);
  CHECK(std::abs(dot) < 1e-12);
}

TEST_CASE("integrate_and_fire with unit weights fires every frame") {
  auto r = integrate_and_fire(eye3(), ws({1, 1, 1}), {}, Mode::kTrain);
  CHECK(r.boundaries == std::vector<std::size_t>{0, 1, 2});
  CHECK(vals(r.embeddings) == vals(eye3()));
}

TEST_CASE("integrate_and_fire splits the crossing frame") {
  auto r = integrate_and_fire(eye3(), ws({0.6, 0.6, 0.8}), {}, Mode::kTrain);
  REQUIRE(r.boundaries == std::vector<std::size_t>{1, 2});
  const std::vector<double> want{0.6, 0.4, 0, 0, 0.2, 0.8};
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(r.embeddings.data()[i] == doctest::Approx(want[i]));
}

TEST_CASE("eval mode fires a tail token above the threshold") {
  const Tensor h2 = Tensor::matrix(2, 2, {1, 0, 0, 1});
  auto r = integrate_and_fire(h2, ws({0.6, 0.3}), {}, Mode::kEval);
  REQUIRE(r.boundaries == std::vector<std::size_t>{1});
  CHECK(r.embeddings.at(0, 0) == doctest::Approx(0.6));
  CHECK(r.embeddings.at(0, 1) == doctest::Approx(0.3));
  auto low = integrate_and_fire(eye3(), ws({0.2, 0.2, 0.0}), {}, Mode::kEval);
  CHECK(low.size() == 0);
  CHECK(low.residual_weight == doctest::Approx(0.4));
  FiringConfig norm;
  norm.normalize_tail = true;
  auto n = integrate_and_fire(h2, ws({0.6, 0.3}), norm, Mode::kEval);
  CHECK(n.embeddings.at(0, 0) == doctest::Approx(0.6 / 0.9));
}

TEST_CASE("integrate_and_fire matches a token-by-token accumulation") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t frames = 1 + rng() % 12, dim = 1 + rng() % 3;
    std::vector<std::vector<double>> h(frames, std::vector<double>(dim));
    std::vector<double> flat, w(frames);
    for (auto& row : h)
      for (auto& x : row) flat.push_back(x = u(rng) * 2 - 1);
    for (auto& x : w) x = u(rng) * 0.9;
    std::vector<std::size_t> want_b;
    const auto want = naive_fire(h, w, 1.0, want_b);
    auto r = integrate_and_fire(Tensor::matrix(frames, dim, flat), ws(w), {}, Mode::kTrain);
    // The train-mode slack may fire one extra token right at the end.
    REQUIRE(r.size() >= want.size());
    REQUIRE(r.size() <= want.size() + 1);
    for (std::size_t k = 0; k < want.size(); ++k) {
      CHECK(r.boundaries[k] == want_b[k]);
      for (std::size_t d = 0; d < dim; ++d) CHECK(r.embeddings.at(k, d) == doctest::Approx(want[k][d]));
    }
  }
}

TEST_CASE("scaled weights fire exactly the target count with unit mass") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t frames = 1 + rng() % 30, target = rng() % 11;
    std::vector<double> w(frames);
    for (auto& x : w) x = u(rng);
    auto s = scale_weights(ws(w), target);
    auto r = integrate_and_fire(Tensor::full({frames, 1}, 1.0), s, {}, Mode::kTrain);
    REQUIRE(r.size() == target);
    for (std::size_t k = 0; k < target; ++k) CHECK(std::abs(r.embeddings.at(k, 0) - 1.0) < 1e-9);
  }
}

TEST_CASE("integrate_and_fire input checks") {
  CHECK_THROWS_AS(integrate_and_fire(eye3(), ws({0.5, 0.5}), {}, Mode::kTrain), ContractError);
  CHECK_THROWS_AS(integrate_and_fire(eye3(), ws({0.5, -0.1, 0.2}), {}, Mode::kTrain), ContractError);
}

TEST_CASE("boundaries to milliseconds") {
  const std::size_t b[] = {1, 2};
  CHECK(boundaries_to_ms(b, 40.0).times_ms == std::vector<double>{40, 80});
  CHECK(boundaries_to_ms(std::span<const std::size_t>{}, 40.0).times_ms.empty());
  const std::size_t z[] = {0};
  CHECK(boundaries_to_ms(z, 40.0).times_ms == std::vector<double>{0});
}

TEST_CASE("trace CSV has one row per frame") {
  AlignmentTrace t;
  t.alpha_ma = {0.1, 0.2};
  t.alpha_en = {0.3, 0.4};
  t.alpha_mix = {0.4, 0.6};
  t.fired_ma = {0, 0};
  t.fired_en = {0, 1};
  t.fired_mix = {0, 1};
  t.gold = {0, 1};
  std::ostringstream os;
  write_trace_csv(os, t);
  std::istringstream is(os.str());
  std::string line;
  int n = 0;
  while (std::getline(is, line)) ++n;
  CHECK(n == 3);
  t.gold.pop_back();
  CHECK_THROWS_AS(write_trace_csv(os, t), ContractError);
}

TEST_CASE("composite CIF and cross-entropy graph against central differences") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.1, 0.9), v(-1, 1);
  int checked = 0;
  for (int trial = 0; checked < 20 && trial < 200; ++trial) {
    std::vector<double> w(6), h(12), proj(2 * 4);
    for (auto& x : w) x = u(rng);
    for (auto& x : h) x = v(rng);
    for (auto& x : proj) x = v(rng);
    testing::GradInstance g;
    g.params = {Tensor::parameter({6}, w), Tensor::parameter({6, 2}, h),
                Tensor::parameter({2, 4}, proj)};
    g.loss = [](const std::vector<Tensor>& p) {
      auto r = integrate_and_fire(p[1], scale_weights({Stream::kMix, p[0], 40.0}, 2), {}, Mode::kTrain);
      const TokenId y[] = {1, 3};
      return cross_entropy(matmul(r.embeddings, p[2]), y);
    };
    // Skip draws whose inner prefix sums sit near a firing threshold.
    double total = 0, s = 0;
    for (double x : w) total += x;
    bool ok = true;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
      s += w[i] * 2 / total;
      if (std::abs(s - std::round(s)) < 1e-3) ok = false;
    }
    if (!ok) continue;
    CHECK(testing::grad_check(g).max_rel_error < testing::kFdRelTol);
    ++checked;
  }
  CHECK(checked == 20);
}
