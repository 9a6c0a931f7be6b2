// tools/cif-align.cpp

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

// Command-line front end: gen-data, train, evaluate, align, score.
//
// Settings are resolved as defaults, then --config, then each --set
// key=value, then the dedicated flags. Exit codes: 0 success, 1 usage or
// configuration error, 2 data error, 3 numerical abort.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cif/commands.hpp"
#include "cif/config.hpp"
#include "cif/errors.hpp"

namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--set", overrides, "override one setting, key=value (repeatable)");
    app->add_option("--seed", seed, "master seed");
  }

  cif::RunConfig resolve() const {
    cif::RunConfig cfg;
    if (!config_file.empty()) cif::apply_config_file(cfg, config_file);
    for (const auto& o : overrides) cif::apply_override(cfg, o);
    if (seed) cfg.seed = *seed;
    return cfg;
  }
};

void print_report(const cif::ScoreReport& r, bool json) {
  std::cout << (json ? cif::report_json(r) : cif::report_table(r));
  if (json) std::cout << "\n";
}

int run(int argc, char** argv) {
  CLI::App app{"Code-switching recognition and token alignment with continuous integrate-and-fire"};
  app.require_subcommand(1);

  // gen-data
  Common gen_common;
  std::string gen_out;
  std::optional<std::size_t> gen_n, gen_offset;
  bool gen_binary = false;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  gen_common.attach(gen);
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("-n,--utterances", gen_n, "number of utterances");
  gen->add_option("--offset", gen_offset, "index of the first utterance in the seed's stream");
  gen->add_flag("--binary", gen_binary, "store features as binary blobs");

  // train
  Common train_common;
  std::string train_data, train_valid, train_out;
  std::optional<std::size_t> train_steps;
  bool resume = false, t_no_lcd = false, t_no_nar = false, t_no_lswe = false;
  auto* tr = app.add_subcommand("train", "train a model");
  train_common.attach(tr);
  tr->add_option("--data", train_data, "training manifest directory");
  tr->add_option("--valid", train_valid, "validation manifest directory");
  tr->add_option("--out", train_out, "output directory");
  tr->add_option("--steps", train_steps, "total optimizer steps");
  tr->add_flag("--resume", resume, "continue from <out>/train_state.ckpt");
  tr->add_flag("--no-lcd", t_no_lcd, "drop the language-change detector");
  tr->add_flag("--no-nar", t_no_nar, "drop the non-autoregressive decoder");
  tr->add_flag("--no-lswe", t_no_lswe, "single shared weight estimator");

  // evaluate
  Common eval_common;
  std::string ev_ckpt, ev_data, ev_out;
  std::optional<std::size_t> ev_beam;
  std::optional<double> ev_tol;
  bool ev_norm = false, ev_no_nar = false, ev_no_lcd = false, ev_json = false;
  auto* ev = app.add_subcommand("evaluate", "decode a manifest and score it");
  eval_common.attach(ev);
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--data", ev_data, "manifest directory")->required();
  ev->add_option("--out", ev_out, "output directory")->required();
  ev->add_option("--beam", ev_beam, "beam width");
  ev->add_option("--tolerance-ms", ev_tol, "boundary tolerance in ms");
  ev->add_flag("--normalize-tail", ev_norm, "rescale a fired tail token to full mass");
  ev->add_flag("--no-nar", ev_no_nar, "build the model without the NAR decoder");
  ev->add_flag("--no-lcd", ev_no_lcd, "build the model without the LCD head");
  ev->add_flag("--json", ev_json, "print the JSON report");

  // align
  Common al_common;
  std::string al_ckpt, al_data, al_out;
  std::optional<std::size_t> al_beam;
  bool al_norm = false;
  auto* al = app.add_subcommand("align", "export per-frame weights and firings");
  al_common.attach(al);
  al->add_option("--checkpoint", al_ckpt, "checkpoint file")->required();
  al->add_option("--data", al_data, "manifest directory")->required();
  al->add_option("--out", al_out, "output directory")->required();
  al->add_option("--beam", al_beam, "beam width");
  al->add_flag("--normalize-tail", al_norm, "rescale a fired tail token to full mass");

  // score
  std::string sc_ref, sc_hyp, sc_ref_b, sc_hyp_b, sc_out;
  double sc_tol = cif::kDefaultToleranceMs;
  bool sc_json = false;
  auto* sc = app.add_subcommand("score", "score hypothesis files without a model");
  sc->add_option("--ref", sc_ref, "reference text file")->required();
  sc->add_option("--hyp", sc_hyp, "hypothesis text file")->required();
  sc->add_option("--ref-boundaries", sc_ref_b, "reference boundary file");
  sc->add_option("--hyp-boundaries", sc_hyp_b, "hypothesis boundary file");
  sc->add_option("--tolerance-ms", sc_tol, "boundary tolerance in ms");
  sc->add_option("--out", sc_out, "also write report.json and report.txt here");
  sc->add_flag("--json", sc_json, "print the JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (gen->parsed()) {
    cif::RunConfig cfg = gen_common.resolve();
    if (gen_n) cfg.data_utterances = *gen_n;
    if (gen_offset) cfg.data_offset = *gen_offset;
    if (gen_binary) cfg.data_binary = true;
    cif::cmd_gen_data(cfg, gen_out, std::cout);
  } else if (tr->parsed()) {
    cif::RunConfig cfg = train_common.resolve();
    if (!train_data.empty()) cfg.data_dir = train_data;
    if (!train_valid.empty()) cfg.valid_dir = train_valid;
    if (!train_out.empty()) cfg.out_dir = train_out;
    if (train_steps) cfg.train.steps = *train_steps;
    if (t_no_lcd) cfg.model.use_lcd = false;
    if (t_no_nar) cfg.model.use_nar = false;
    if (t_no_lswe) cfg.model.use_lswe = false;
    const auto s = cif::cmd_train(cfg, resume, std::cout);
    std::cout << "trained steps " << s.first_step << ".." << s.last_step << "\n";
    if (s.best_valid_mer) {
      std::cout << "best validation MER " << *s.best_valid_mer << " at step " << s.best_step << "\n";
    }
  } else if (ev->parsed()) {
    cif::RunConfig cfg = eval_common.resolve();
    if (ev_norm) cfg.model.firing.normalize_tail = true;
    if (ev_no_nar) cfg.model.use_nar = false;
    if (ev_no_lcd) cfg.model.use_lcd = false;
    cif::EvalOptions opts;
    opts.beam = ev_beam.value_or(cfg.eval.beam);
    opts.tolerance_ms = ev_tol.value_or(cfg.eval.tolerance_ms);
    print_report(cif::cmd_evaluate(cfg, ev_ckpt, ev_data, ev_out, opts), ev_json);
  } else if (al->parsed()) {
    cif::RunConfig cfg = al_common.resolve();
    if (al_norm) cfg.model.firing.normalize_tail = true;
    cif::cmd_align(cfg, al_ckpt, al_data, al_out, al_beam.value_or(cfg.eval.beam));
  } else if (sc->parsed()) {
    std::optional<fs::path> rb, hb;
    if (!sc_ref_b.empty()) rb = sc_ref_b;
    if (!sc_hyp_b.empty()) hb = sc_hyp_b;
    const auto r = cif::cmd_score(sc_ref, sc_hyp, rb, hb, sc_tol);
    if (!sc_out.empty()) cif::write_report(r, sc_out);
    print_report(r, sc_json);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const cif::NumericalError& e) {
    std::cerr << "numerical error (" << e.term() << "): " << e.what() << "\n";
    return 3;
  } catch (const cif::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 2;
  } catch (const cif::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const cif::ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
