// src/commands.cpp

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

#include "cif/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "cif/errors.hpp"
#include "cif/train.hpp"

namespace cif {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
  }
}

fs::path sidecar(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p += ".cfg";
  return p;
}

void save_model(const CifModel& model, const RunConfig& cfg, const fs::path& path) {
  model.save(path);
  write_config_file(cfg, sidecar(path));
}

void check_vocab(const Corpus& corpus, const ModelConfig& m, const std::string& what) {
  if (corpus.vocab != m.vocab() || corpus.feat_dim != m.feat_dim) {
    throw ConfigError(what + " has vocabulary " + std::to_string(corpus.vocab.n_ma()) + "+" +
                      std::to_string(corpus.vocab.n_en()) + " and feat_dim " +
                      std::to_string(corpus.feat_dim) + ", model expects " +
                      std::to_string(m.n_ma) + "+" + std::to_string(m.n_en) + " and " +
                      std::to_string(m.feat_dim));
  }
}

std::size_t decode_threads() {
  std::size_t n = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CIF_ALIGN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw ConfigError(std::string("CIF_ALIGN_THREADS must be a positive integer, got '") + env +
                        "'");
    }
    n = std::min(n, static_cast<std::size_t>(v));
  }
  return n;
}

std::string join_tokens(const TokenSequence& t) {
  std::string s;
  for (TokenId id : t) {
    if (!s.empty()) s += ' ';
    s += std::to_string(id);
  }
  return s;
}

double encoder_shift_ms(const CifModel& model) {
  return model.config().frame_shift_ms * static_cast<double>(kDownsample);
}

// Keeps the header and records up to `step` of a step-keyed log.
void truncate_log(const fs::path& path, std::size_t step) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string() + " to resume");
  std::string header, line, kept;
  std::getline(in, header);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t s = std::stoull(line.substr(0, line.find('\t')));
    if (s <= step) kept += line + "\n";
  }
  in.close();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << header << "\n" << kept;
}

struct ValidResult {
  double mer = 0.0;
  double f1 = 0.0;
};

ValidResult validate_model(const CifModel& model, const Corpus& corpus, std::size_t beam) {
  const auto results = decode_corpus(model, corpus, beam);
  ErrorCounts all;
  BoundaryScore b;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& u = corpus.utterances[i];
    const auto hyp = make_transcript(results[i].best.tokens, model.vocab());
    all += per_language_rates(u.transcript, hyp, model.vocab()).all;
    b += boundary_f1(u.gold, boundaries_to_ms(results[i].boundaries, encoder_shift_ms(model)));
  }
  return {all.rate().value_or(0.0), b.f1()};
}

constexpr const char* kModelPrefix = "model/";
constexpr const char* kAdamPrefix = "adam/";

void save_train_state(const fs::path& path, const CifModel& model, const Adam& adam,
                      std::size_t step, double best_mer, std::size_t best_step) {
  std::vector<NamedTensor> out;
  out.push_back({"meta/step", Tensor::scalar(static_cast<double>(step))});
  out.push_back({"meta/best_mer", Tensor::scalar(best_mer)});
  out.push_back({"meta/best_step", Tensor::scalar(static_cast<double>(best_step))});
  for (const auto& name : model.params().names()) {
    const Tensor& p = model.params().get(name);
    out.push_back({kModelPrefix + name, Tensor::from(p.shape(), {p.data().begin(), p.data().end()})});
  }
  for (auto& s : adam.state()) out.push_back({kAdamPrefix + s.name, s.tensor});
  save_tensors(path, out);
}

struct ResumeState {
  std::size_t step = 0;
  double best_mer = std::numeric_limits<double>::infinity();
  std::size_t best_step = 0;
};

ResumeState load_train_state(const fs::path& path, CifModel& model, Adam& adam) {
  if (!fs::exists(path)) throw DataError("no training state at " + path.string());
  const auto tensors = load_tensors(path);
  ResumeState r;
  std::vector<NamedTensor> adam_state;
  std::size_t loaded = 0;
  for (const auto& t : tensors) {
    const std::string& n = t.name;
    if (n == "meta/step") {
      r.step = static_cast<std::size_t>(t.tensor.item());
    } else if (n == "meta/best_mer") {
      r.best_mer = t.tensor.item();
    } else if (n == "meta/best_step") {
      r.best_step = static_cast<std::size_t>(t.tensor.item());
    } else if (n.rfind(kModelPrefix, 0) == 0) {
      const std::string name = n.substr(std::string(kModelPrefix).size());
      if (!model.params().contains(name)) {
        throw DataError(path.string() + ": parameter " + name + " not in the model");
      }
      Tensor& p = model.params().get(name);
      if (p.shape() != t.tensor.shape()) {
        throw DataError(path.string() + ": shape mismatch for " + name);
      }
      std::copy(t.tensor.data().begin(), t.tensor.data().end(), p.mutable_data().begin());
      ++loaded;
    } else if (n.rfind(kAdamPrefix, 0) == 0) {
      adam_state.push_back({n.substr(std::string(kAdamPrefix).size()), t.tensor});
    } else {
      throw DataError(path.string() + ": unexpected entry " + n);
    }
  }
  if (loaded != model.params().names().size()) {
    throw DataError(path.string() + ": training state does not cover every parameter");
  }
  adam.load_state(adam_state);
  return r;
}

}  // namespace

CorpusStats cmd_gen_data(const RunConfig& cfg, const fs::path& out_dir, std::ostream& log) {
  validate(cfg);
  if (cfg.data_utterances == 0) throw ConfigError("data.utterances must be positive");
  const Corpus corpus = generate(resolved_data(cfg), cfg.data_utterances, cfg.data_offset);
  ensure_dir(out_dir);
  write_manifest(corpus, out_dir, cfg.data_binary);
  const CorpusStats s = corpus_stats(corpus);
  log << "utterances\t" << s.utterances << "\n"
      << "ma_tokens\t" << s.ma_tokens << "\n"
      << "en_tokens\t" << s.en_tokens << "\n"
      << "switch_points\t" << s.switch_points << "\n"
      << "frames\t" << s.frames << "\n";
  return s;
}

TrainSummary cmd_train(const RunConfig& cfg, bool resume, std::ostream& log) {
  validate(cfg);
  if (cfg.data_dir.empty()) throw ConfigError("paths.data is required for training");
  if (cfg.out_dir.empty()) throw ConfigError("paths.out is required for training");
  const ModelConfig mc = resolved_model(cfg);

  const Corpus train = read_manifest(cfg.data_dir);
  check_vocab(train, mc, "training manifest");
  if (train.utterances.empty()) throw DataError("training manifest is empty");
  std::optional<Corpus> valid;
  if (!cfg.valid_dir.empty()) {
    valid = read_manifest(cfg.valid_dir);
    check_vocab(*valid, mc, "validation manifest");
  }

  ensure_dir(cfg.out_dir);
  const fs::path state_path = cfg.out_dir / "train_state.ckpt";
  const fs::path loss_path = cfg.out_dir / "loss_log.tsv";
  const fs::path valid_path = cfg.out_dir / "valid_log.tsv";
  write_config_file(cfg, cfg.out_dir / "config.cfg");

  CifModel model(mc, cfg.seed);
  Adam adam(model.params().tensors(), cfg.train.adam);
  ResumeState st;
  if (resume) {
    st = load_train_state(state_path, model, adam);
    truncate_log(loss_path, st.step);
    if (fs::exists(valid_path)) truncate_log(valid_path, st.step);
  } else {
    std::ofstream lf(loss_path, std::ios::binary | std::ios::trunc);
    write_loss_log_header(lf);
    if (valid) std::ofstream(valid_path, std::ios::binary | std::ios::trunc) << "step\tmer\tf1\n";
  }

  std::ofstream loss_log(loss_path, std::ios::binary | std::ios::app);
  std::ofstream valid_log;
  if (valid) valid_log.open(valid_path, std::ios::binary | std::ios::app);
  if (!loss_log) throw DataError("cannot write " + loss_path.string());

  TrainSummary summary;
  summary.first_step = st.step + 1;
  std::vector<const SynthUtterance*> batch;
  for (std::size_t step = st.step + 1; step <= cfg.train.steps; ++step) {
    batch.clear();
    for (std::size_t i : batch_indices(cfg.seed, train.utterances.size(), cfg.train.batch_size, step)) {
      batch.push_back(&train.utterances[i]);
    }
    const StepStats s = train_step(model, adam, batch, cfg.train, cfg.seed, step);
    write_loss_log_record(loss_log, step, s.mean);
    loss_log.flush();
    if (cfg.log_every && (step % cfg.log_every == 0 || step == 1)) {
      log << "step " << step << " loss " << s.mean.total << " lr " << s.lr << " grad_norm "
          << s.grad_norm << "\n";
    }
    if (valid && cfg.valid_every && step % cfg.valid_every == 0) {
      const ValidResult v = validate_model(model, *valid, cfg.valid_beam);
      valid_log << step << '\t' << v.mer << '\t' << v.f1 << '\n';
      valid_log.flush();
      log << "valid step " << step << " mer " << v.mer << " f1 " << v.f1 << "\n";
      if (v.mer < st.best_mer) {
        st.best_mer = v.mer;
        st.best_step = step;
        save_model(model, cfg, cfg.out_dir / "best.ckpt");
      }
    }
    if ((cfg.checkpoint_every && step % cfg.checkpoint_every == 0) || step == cfg.train.steps) {
      save_train_state(state_path, model, adam, step, st.best_mer, st.best_step);
    }
  }
  save_model(model, cfg, cfg.out_dir / "final.ckpt");
  if (st.best_step == 0) save_model(model, cfg, cfg.out_dir / "best.ckpt");

  summary.last_step = std::max(st.step, cfg.train.steps);
  if (st.best_step) summary.best_valid_mer = st.best_mer;
  summary.best_step = st.best_step;
  return summary;
}

CifModel load_model(const RunConfig& cfg, const fs::path& checkpoint) {
  if (!fs::exists(checkpoint)) throw DataError("checkpoint not found: " + checkpoint.string());
  RunConfig trained;
  const fs::path side = sidecar(checkpoint);
  if (fs::exists(side)) {
    apply_config_file(trained, side);
  } else {
    trained = cfg;
  }
  ModelConfig mc = resolved_model(trained);
  mc.firing = cfg.model.firing;
  mc.use_nar = cfg.model.use_nar;
  mc.use_lcd = cfg.model.use_lcd;
  validate(mc);
  CifModel model(mc, trained.seed);
  model.load(checkpoint, false);
  return model;
}

std::vector<InferenceResult> decode_corpus(const CifModel& model, const Corpus& corpus,
                                           std::size_t beam) {
  const std::size_t n = corpus.utterances.size();
  std::vector<InferenceResult> out(n);
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      out[i] = model.infer(corpus.utterances[i].features, beam);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const std::size_t threads = std::min(decode_threads(), std::max<std::size_t>(n, 1));
  if (threads <= 1) {
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
  return out;
}

ScoreReport cmd_evaluate(const RunConfig& cfg, const fs::path& checkpoint,
                         const fs::path& manifest_dir, const fs::path& out_dir,
                         const EvalOptions& opts) {
  if (opts.beam == 0) throw ConfigError("beam width must be positive");
  const CifModel model = load_model(cfg, checkpoint);
  const Corpus corpus = read_manifest(manifest_dir);
  check_vocab(corpus, model.config(), "manifest " + manifest_dir.string());
  const auto results = decode_corpus(model, corpus, opts.beam);

  std::vector<std::pair<std::string, std::string>> ref, hyp, ref_b, hyp_b, hyp_tok;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& u = corpus.utterances[i];
    const auto h = make_transcript(results[i].best.tokens, model.vocab());
    ref.emplace_back(u.id, render_text(u.transcript, model.vocab()));
    hyp.emplace_back(u.id, render_text(h, model.vocab()));
    ref_b.emplace_back(u.id, format_boundaries(u.gold));
    hyp_b.emplace_back(
        u.id, format_boundaries(boundaries_to_ms(results[i].boundaries, encoder_shift_ms(model))));
    hyp_tok.emplace_back(u.id, join_tokens(results[i].best.tokens));
  }
  ensure_dir(out_dir);
  write_keyed_lines(out_dir / "ref.txt", ref);
  write_keyed_lines(out_dir / "hyp.txt", hyp);
  write_keyed_lines(out_dir / "ref_boundaries.txt", ref_b);
  write_keyed_lines(out_dir / "hyp_boundaries.txt", hyp_b);
  write_keyed_lines(out_dir / "hyp_tokens.txt", hyp_tok);

  ScoreReport report = cmd_score(out_dir / "ref.txt", out_dir / "hyp.txt",
                                 out_dir / "ref_boundaries.txt", out_dir / "hyp_boundaries.txt",
                                 opts.tolerance_ms);
  write_report(report, out_dir);
  return report;
}

void cmd_align(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& manifest_dir,
               const fs::path& out_dir, std::size_t beam) {
  if (beam == 0) throw ConfigError("beam width must be positive");
  const CifModel model = load_model(cfg, checkpoint);
  const Corpus corpus = read_manifest(manifest_dir);
  check_vocab(corpus, model.config(), "manifest " + manifest_dir.string());
  const auto results = decode_corpus(model, corpus, beam);
  ensure_dir(out_dir);

  const double shift = model.config().frame_shift_ms;
  std::vector<std::pair<std::string, std::string>> index;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& u = corpus.utterances[i];
    const auto& r = results[i];
    const std::size_t frames = r.alpha_mix.size();
    AlignmentTrace tr;
    auto values = [frames](const WeightSequence& w) {
      if (!w.values.defined()) return std::vector<double>(frames, 0.0);
      return std::vector<double>(w.values.data().begin(), w.values.data().end());
    };
    auto fired = [&](const WeightSequence& w) {
      if (!w.values.defined()) return std::vector<int>(frames, 0);
      // Firing positions do not depend on the frames being integrated.
      NoGradGuard guard;
      const FiringResult f =
          integrate_and_fire(Tensor::zeros({frames, 1}), w, model.config().firing, Mode::kEval);
      return fired_per_frame(f.boundaries, frames);
    };
    tr.alpha_ma = values(r.alpha_ma);
    tr.alpha_en = values(r.alpha_en);
    tr.alpha_mix = values(r.alpha_mix);
    tr.fired_ma = fired(r.alpha_ma);
    tr.fired_en = fired(r.alpha_en);
    tr.fired_mix = fired_per_frame(r.fired_mix.boundaries, frames);
    tr.gold.assign(frames, 0);
    for (double ms : u.gold.times_ms) {
      const auto frame = static_cast<std::size_t>(std::floor(ms / shift)) / kDownsample;
      ++tr.gold[std::min(frame, frames - 1)];
    }
    const fs::path path = out_dir / (u.id + ".csv");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    write_trace_csv(os, tr);
    const auto h = make_transcript(r.best.tokens, model.vocab());
    index.emplace_back(u.id, render_text(h, model.vocab()) + "\t" +
                                 format_boundaries(boundaries_to_ms(r.boundaries,
                                                                    encoder_shift_ms(model))));
  }
  write_keyed_lines(out_dir / "alignments.tsv", index);
}

ScoreReport cmd_score(const fs::path& ref_file, const fs::path& hyp_file,
                      const std::optional<fs::path>& ref_boundaries,
                      const std::optional<fs::path>& hyp_boundaries, double tolerance_ms) {
  if (ref_boundaries.has_value() != hyp_boundaries.has_value()) {
    throw ConfigError("reference and hypothesis boundary files must be given together");
  }
  if (tolerance_ms < 0.0) throw ConfigError("tolerance must be non-negative");
  const auto ref = read_keyed_lines(ref_file);
  const auto hyp = read_keyed_lines(hyp_file);
  std::map<std::string, BoundarySet> rb, hb;
  if (ref_boundaries) {
    for (const auto& [id, payload] : read_keyed_lines(*ref_boundaries)) rb[id] = parse_boundaries(payload);
    for (const auto& [id, payload] : read_keyed_lines(*hyp_boundaries)) hb[id] = parse_boundaries(payload);
  }
  return score_corpus(ref, hyp, rb, hb, tolerance_ms);
}

void write_report(const ScoreReport& report, const fs::path& out_dir) {
  ensure_dir(out_dir);
  for (const auto& [name, text] :
       {std::pair<const char*, std::string>{"report.json", report_json(report)},
        {"report.txt", report_table(report)}}) {
    std::ofstream os(out_dir / name, std::ios::binary);
    if (!os) throw DataError("cannot write " + (out_dir / name).string());
    os << text;
  }
}

}  // namespace cif
