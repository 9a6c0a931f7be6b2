// tests/test_config.cpp

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

#include "cif/config.hpp"
#include "cif/errors.hpp"
#include "doctest.h"

using namespace cif;

TEST_CASE("dump and parse round trip") {
  RunConfig a;
  set_option(a, "seed", "11");
  set_option(a, "data.sigma", "0.125");
  set_option(a, "model.estimator_kernels", "5,1");
  set_option(a, "model.use_lswe", "false");
  set_option(a, "model.lcd_convention", "last_before");
  set_option(a, "train.peak_lr", "0.0031");
  set_option(a, "paths.out", "runs/x");
  RunConfig b;
  apply_config_text(b, dump_config(a), "dump");
  CHECK(dump_config(b) == dump_config(a));
  CHECK(b.seed == 11);
  CHECK(b.data.sigma == 0.125);
  CHECK(b.model.estimator_kernels == std::vector<std::size_t>{5, 1});
  CHECK_FALSE(b.model.use_lswe);
  CHECK(b.model.lcd_convention == LcdConvention::kLastBefore);
  CHECK(b.train.schedule.peak_lr == 0.0031);
  CHECK(b.out_dir == "runs/x");
  for (const auto& k : config_keys()) CHECK(get_option(a, k) == get_option(b, k));
}

TEST_CASE("comments, blanks and overrides") {
  RunConfig c;
  apply_config_text(c, "# header\n\n  train.steps = 12   # trailing\n", "t");
  CHECK(c.train.steps == 12);
  apply_override(c, "eval.beam=3");
  CHECK(c.eval.beam == 3);
}

TEST_CASE("bad input is reported with its origin") {
  RunConfig c;
  try {
    apply_config_text(c, "seed=1\nmodel.bogus=2\n", "f.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("f.cfg:2") != std::string::npos);
    CHECK(std::string(e.what()).find("model.bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(set_option(c, "train.steps", "ten"), ConfigError);
  CHECK_THROWS_AS(set_option(c, "model.use_nar", "maybe"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "novalue"), ConfigError);
  CHECK_THROWS_AS(apply_config_file(c, "/nonexistent/x.cfg"), ConfigError);
}

TEST_CASE("validation and resolution") {
  RunConfig c;
  CHECK_NOTHROW(validate(c));
  c.data.n_ma = 5;
  c.data.feat_dim = 3;
  const auto m = resolved_model(c);
  CHECK(m.n_ma == 5);
  CHECK(m.feat_dim == 3);
  c.seed = 99;
  CHECK(resolved_data(c).seed == 99);
  c.train.speed_perturb = 1.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.train.batch_size = 0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = {};
  c.model.d_model = 7;
  CHECK_THROWS_AS(validate(c), ConfigError);
}
