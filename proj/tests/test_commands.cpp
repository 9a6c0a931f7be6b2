// tests/test_commands.cpp

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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cif/commands.hpp"
#include "cif/errors.hpp"
#include "doctest.h"

using namespace cif;
namespace fs = std::filesystem;

namespace {

fs::path fresh(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("cif_cmd_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

RunConfig tiny_run() {
  RunConfig c;
  c.data.n_ma = 4;
  c.data.n_en = 4;
  c.data.feat_dim = 4;
  c.data.max_tokens = 4;
  c.data_utterances = 12;
  c.model.d_model = 8;
  c.model.ffn_dim = 16;
  c.model.estimator_filters = 6;
  c.model.max_tokens = 16;
  c.train.steps = 6;
  c.train.batch_size = 2;
  c.train.speed_perturb = 0.1;
  c.valid_every = 3;
  c.checkpoint_every = 3;
  c.log_every = 1;
  return c;
}

// Shared fixture: one data set and one trained run.
struct Trained {
  RunConfig cfg = tiny_run();
  fs::path root = fresh("shared");
  Trained() {
    std::ostringstream log;
    cmd_gen_data(cfg, root / "train", log);
    RunConfig v = cfg;
    v.data_utterances = 5;
    v.data_offset = 1000;
    cmd_gen_data(v, root / "valid", log);
    cfg.data_dir = root / "train";
    cfg.valid_dir = root / "valid";
    cfg.out_dir = root / "run";
    cmd_train(cfg, false, log);
  }
};

const Trained& trained() {
  static const Trained t;
  return t;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("gen-data is deterministic and reports true statistics") {
  RunConfig c = tiny_run();
  std::ostringstream log;
  const auto a = fresh("gen_a"), b = fresh("gen_b");
  const auto stats = cmd_gen_data(c, a, log);
  cmd_gen_data(c, b, log);
  CHECK(slurp(a / "manifest.tsv") == slurp(b / "manifest.tsv"));
  const Corpus corpus = read_manifest(a);
  std::size_t switches = 0;
  for (const auto& u : corpus.utterances) switches += count_switch_points(u.transcript);
  CHECK(stats.utterances == 12);
  CHECK(stats.switch_points == switches);
  CHECK(log.str().find("utterances\t12") != std::string::npos);
  c.data_utterances = 0;
  CHECK_THROWS_AS(cmd_gen_data(c, fresh("gen_0"), log), ConfigError);
}

TEST_CASE("training writes its outputs and resumes exactly") {
  const auto& t = trained();
  for (const char* f : {"config.cfg", "loss_log.tsv", "valid_log.tsv", "final.ckpt", "best.ckpt",
                        "final.ckpt.cfg", "train_state.ckpt"})
    CHECK(fs::exists(t.cfg.out_dir / f));

  RunConfig c = t.cfg;
  c.out_dir = fresh("resume");
  std::ostringstream log;
  c.train.steps = 3;
  cmd_train(c, false, log);
  c.train.steps = 6;
  const auto summary = cmd_train(c, true, log);
  CHECK(summary.first_step == 4);
  CHECK(summary.last_step == 6);
  CHECK(slurp(c.out_dir / "final.ckpt") == slurp(t.cfg.out_dir / "final.ckpt"));
  CHECK(slurp(c.out_dir / "loss_log.tsv") == slurp(t.cfg.out_dir / "loss_log.tsv"));
}

TEST_CASE("evaluate agrees with score on its own outputs") {
  const auto& t = trained();
  const auto out = fresh("eval");
  const auto r = cmd_evaluate(t.cfg, t.cfg.out_dir / "final.ckpt", t.cfg.valid_dir, out, {3, 50});
  const auto s = cmd_score(out / "ref.txt", out / "hyp.txt", out / "ref_boundaries.txt",
                           out / "hyp_boundaries.txt", 50);
  CHECK(report_json(r) == report_json(s));
  CHECK(slurp(out / "report.json").find(report_json(s).substr(0, 20)) != std::string::npos);
  CHECK_THROWS_AS(cmd_score(out / "ref.txt", out / "hyp.txt", out / "ref_boundaries.txt",
                            std::nullopt, 50),
                  ConfigError);
}

TEST_CASE("align traces match a re-simulation of firing") {
  const auto& t = trained();
  const auto out = fresh("align");
  cmd_align(t.cfg, t.cfg.out_dir / "final.ckpt", t.cfg.valid_dir, out, 2);
  const Corpus corpus = read_manifest(t.cfg.valid_dir);
  const CifModel model = load_model(t.cfg, t.cfg.out_dir / "final.ckpt");
  CHECK(read_keyed_lines(out / "alignments.tsv").size() == corpus.utterances.size());
  for (const auto& u : corpus.utterances) {
    const auto rows = read_csv(out / (u.id + ".csv"));
    const std::size_t frames = (u.features.rows() + kDownsample - 1) / kDownsample;
    REQUIRE(rows.size() == frames);
    std::vector<double> mix;
    std::vector<int> fired, gold;
    for (const auto& r : rows) {
      REQUIRE(r.size() == 8);
      mix.push_back(std::stod(r[3]));
      fired.push_back(std::stoi(r[6]));
      gold.push_back(std::stoi(r[7]));
    }
    // Independent sequential accumulation at the eval threshold.
    std::vector<int> expect(frames, 0);
    double acc = 0;
    for (std::size_t f = 0; f < frames; ++f) {
      acc += mix[f];
      while (acc >= model.config().firing.beta) {
        ++expect[f];
        acc -= model.config().firing.beta;
      }
    }
    if (acc >= model.config().firing.tail_threshold) ++expect[frames - 1];
    CHECK(fired == expect);
    int gold_total = 0;
    for (int g : gold) gold_total += g;
    CHECK(gold_total == static_cast<int>(u.gold.times_ms.size()));
  }
}
