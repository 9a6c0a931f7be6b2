// tests/test_losses.cpp

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
#include <random>
#include <sstream>

#include "cif/errors.hpp"
#include "cif/losses.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace cif;

namespace {

WeightSequence ws(std::vector<double> v) { return {Stream::kMix, Tensor::vector(std::move(v)), 40.0}; }

// -sum log softmax, recomputed with scalar arithmetic.
double scalar_ce(const std::vector<std::vector<double>>& logits, const std::vector<TokenId>& y) {
  double loss = 0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    double z = 0;
    for (double x : logits[t]) z += std::exp(x);
    loss -= logits[t][static_cast<std::size_t>(y[t])] - std::log(z);
  }
  return loss;
}

}  // namespace

TEST_CASE("quantity loss examples") {
  QuantityTargets q{3, 2, 5};
  CHECK(quantity_loss(ws({1, 1, 1}), ws({1, 1}), ws({2, 2, 1}), q).item() == 0.0);
  CHECK(quantity_loss(ws({1, 1, 0.5}), ws({1, 1}), ws({2, 2, 0.5}), q).item() == doctest::Approx(0.75));
  CHECK(quantity_loss_mix_only(ws({2, 2, 0.5}), 5).item() == doctest::Approx(0.5));
}

TEST_CASE("quantity loss gradients are unit steps off the kink") {
  Tensor a = Tensor::parameter({2}, {0.5, 0.5}), b = Tensor::parameter({2}, {0.1, 0.1});
  Tensor m = Tensor::parameter({2}, {1.0, 1.5});
  backward(quantity_loss({Stream::kMa, a, 40}, {Stream::kEn, b, 40}, {Stream::kMix, m, 40}, {3, 0, 3}));
  CHECK(a.grad() == std::vector<double>{-0.5, -0.5});
  CHECK(b.grad() == std::vector<double>{0.5, 0.5});
  CHECK(m.grad() == std::vector<double>{-1.0, -1.0});
}

TEST_CASE("cross entropy examples") {
  const TokenId y0[] = {2};
  CHECK(cross_entropy(Tensor::matrix(1, 4, {0, 0, 0, 0}), y0).item() == doctest::Approx(std::log(4.0)));
  CHECK(cross_entropy(Tensor::matrix(1, 4, {0, 0, 60, 0}), y0).item() < 1e-20);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  std::vector<std::vector<double>> l(3, std::vector<double>(5));
  std::vector<double> flat;
  for (auto& r : l)
    for (auto& x : r) flat.push_back(x = n(rng));
  const std::vector<TokenId> y{4, 0, 2};
  CHECK(ar_ce_loss(Tensor::matrix(3, 5, flat), y).item() == doctest::Approx(scalar_ce(l, y)).epsilon(1e-12));
  const TokenId bad[] = {5};
  CHECK_THROWS_AS(cross_entropy(Tensor::matrix(1, 5, {0, 0, 0, 0, 0}), bad), ContractError);
}

TEST_CASE("nar loss is the sum of the two monolingual terms") {
  CHECK(nar_ce_loss(Tensor(), {}, Tensor(), {}).item() == 0.0);
  Tensor a = Tensor::matrix(2, 3, {0.1, 0.5, -1, 2, 0, 0.3});
  Tensor b = Tensor::matrix(1, 3, {1, -1, 0});
  const TokenId ya[] = {1, 0}, yb[] = {2};
  CHECK(nar_ce_loss(a, ya, Tensor(), {}).item() == cross_entropy(a, ya).item());
  CHECK(nar_ce_loss(a, ya, b, yb).item() ==
        doctest::Approx(cross_entropy(a, ya).item() + cross_entropy(b, yb).item()));
}

TEST_CASE("lcd binary cross-entropy examples") {
  LanguageChangeTargets t{{1, 0, 1, 0}};
  CHECK(lcd_bce_loss(Tensor::vector({0.5, 0.5, 0.5, 0.5}), t).item() == doctest::Approx(4 * std::log(2.0)));
  CHECK(lcd_bce_loss(Tensor::vector({1, 0, 1, 0}), t).item() < 1e-5);
  LanguageChangeTargets s{{1, 0}};
  CHECK(lcd_bce_loss(Tensor::vector({0.9, 0.2}), s).item() ==
        doctest::Approx(-(std::log(0.9) + std::log(0.8))));
  CHECK_THROWS_AS(lcd_bce_loss(Tensor::vector({0.5}), s), ContractError);
}

TEST_CASE("ctc hand examples") {
  const TokenId a[] = {0};
  CHECK(ctc_loss(Tensor::matrix(1, 2, {0, 0}), a, 1).item() == doctest::Approx(-std::log(0.5)));
  CHECK(ctc_loss(Tensor::matrix(2, 2, {0, 0, 0, 0}), a, 1).item() == doctest::Approx(-std::log(0.75)));
  Tensor l = Tensor::matrix(3, 3, {0.1, 0.2, 0.3, -1, 0, 1, 2, 0.5, -0.5});
  double want = 0;
  for (std::size_t t = 0; t < 3; ++t) {
    double z = 0;
    for (std::size_t c = 0; c < 3; ++c) z += std::exp(l.at(t, c));
    want -= l.at(t, 2) - std::log(z);
  }
  CHECK(ctc_loss(l, {}, 2).item() == doctest::Approx(want));
}

TEST_CASE("ctc matches path enumeration") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t classes = 2 + rng() % 3, frames = 1 + rng() % 5;
    std::vector<TokenId> y(rng() % 4);
    for (auto& t : y) t = static_cast<TokenId>(rng() % (classes - 1));
    std::vector<double> v(frames * classes);
    for (auto& x : v) x = n(rng);
    Tensor l = Tensor::matrix(frames, classes, v);
    const TokenId blank = static_cast<TokenId>(classes - 1);
    if (ctc_min_frames(y) > frames) {
      CHECK_THROWS_AS(ctc_loss(l, y, blank), InfeasibleAlignmentError);
      continue;
    }
    CHECK(ctc_loss(l, y, blank).item() == doctest::Approx(testing::ctc_brute_force(l, y, blank)).epsilon(1e-10));
  }
}

TEST_CASE("ctc minimum frames counts repeats") {
  const TokenId y[] = {3, 3, 4, 3};
  CHECK(ctc_min_frames(y) == 5);
  CHECK(ctc_min_frames({}) == 0);
}

TEST_CASE("combine weights the terms") {
  LossTerms t{Tensor::scalar(1), Tensor::scalar(1), Tensor::scalar(1), Tensor::scalar(1), Tensor::scalar(1)};
  CHECK(combine(t, {}).bundle.total == doctest::Approx(1.81));
  CHECK(combine(t, {0, 0, 0, 0}).bundle.total == 1.0);
  LossTerms u{Tensor::scalar(2.5), Tensor::scalar(3.0), Tensor::scalar(0.7), Tensor::scalar(1.2), Tensor::scalar(0.4)};
  CHECK(combine(u, {}).total.item() == doctest::Approx(2.5 + 0.5 * 3.0 + 0.01 * 0.7 + 0.2 * 1.2 + 0.1 * 0.4));
  LossTerms only_ar{Tensor::scalar(2.0), {}, {}, {}, {}};
  CHECK(combine(only_ar, {}).bundle.total == 2.0);
}

TEST_CASE("combine names the first non-finite term") {
  LossTerms t{Tensor::scalar(1), Tensor::scalar(NAN), Tensor::scalar(1), {}, {}};
  try {
    combine(t, {});
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(e.term() == "ctc");
  }
}

TEST_CASE("loss log records") {
  std::ostringstream os;
  write_loss_log_header(os);
  write_loss_log_record(os, 3, {1, 2, 3, 4, 5, 6});
  CHECK(os.str() == "step\tar_ce\tctc\tquantity\tnar_ce\tlcd_bce\ttotal\n3\t1\t2\t3\t4\t5\t6\n");
}
