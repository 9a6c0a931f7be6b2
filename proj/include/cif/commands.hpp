// cif/commands.hpp

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

// The operations behind the command-line tool. Each one is deterministic
// given its configuration and reports failures through the library error
// types (ConfigError, DataError, NumericalError).
//
// Files written by train (under paths.out):
//   config.cfg              the resolved run configuration
//   loss_log.tsv            one record per step (see write_loss_log_record)
//   valid_log.tsv           step, MER, boundary F1 per validation
//   final.ckpt, best.ckpt   parameters, each with a .cfg sidecar
//   train_state.ckpt        parameters, optimizer moments and progress
//
// Files written by evaluate (under its output directory):
//   ref.txt, hyp.txt                      utt_id<TAB>text
//   ref_boundaries.txt, hyp_boundaries.txt  utt_id<TAB>ms ms ...
//   hyp_tokens.txt                        utt_id<TAB>token ids
//   report.json, report.txt

#ifndef CIF_COMMANDS_HPP_
#define CIF_COMMANDS_HPP_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "cif/config.hpp"
#include "cif/metrics.hpp"
#include "cif/model.hpp"
#include "cif/synthdata.hpp"

namespace cif {

// Writes a corpus of data.utterances utterances to `out_dir` and prints its
// statistics. Zero utterances is a ConfigError.
CorpusStats cmd_gen_data(const RunConfig& cfg, const std::filesystem::path& out_dir,
                         std::ostream& log);

struct TrainSummary {
  std::size_t first_step = 0;  // first step run by this call
  std::size_t last_step = 0;
  std::optional<double> best_valid_mer;
  std::size_t best_step = 0;
};

// Trains from paths.data, validating on paths.valid when set. With `resume`
// the run continues from paths.out/train_state.ckpt; the result is identical
// to an uninterrupted run.
TrainSummary cmd_train(const RunConfig& cfg, bool resume, std::ostream& log);

// Model from a checkpoint and its .cfg sidecar. Architecture comes from the
// sidecar; firing settings and the use_nar / use_lcd switches from `cfg`.
CifModel load_model(const RunConfig& cfg, const std::filesystem::path& checkpoint);

// Beam search over every utterance, spread over at most CIF_ALIGN_THREADS
// threads (default: hardware concurrency). Results are in corpus order.
std::vector<InferenceResult> decode_corpus(const CifModel& model, const Corpus& corpus,
                                           std::size_t beam);

struct EvalOptions {
  std::size_t beam = 10;
  double tolerance_ms = kDefaultToleranceMs;
};

// Decodes the manifest, writes hypothesis and reference files to `out_dir`
// and scores them by re-reading those files, exactly as cmd_score would.
// A vocabulary differing from the checkpoint's is a ConfigError.
ScoreReport cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                         const std::filesystem::path& manifest_dir,
                         const std::filesystem::path& out_dir, const EvalOptions& opts);

// One <utt_id>.csv per utterance in the trace format of write_trace_csv,
// plus alignments.tsv (utt_id, hypothesis, boundaries).
void cmd_align(const RunConfig& cfg, const std::filesystem::path& checkpoint,
               const std::filesystem::path& manifest_dir, const std::filesystem::path& out_dir,
               std::size_t beam);

// Standalone scoring of keyed text files; boundary files are optional but
// must be given together.
ScoreReport cmd_score(const std::filesystem::path& ref_file, const std::filesystem::path& hyp_file,
                      const std::optional<std::filesystem::path>& ref_boundaries,
                      const std::optional<std::filesystem::path>& hyp_boundaries,
                      double tolerance_ms);

// Writes report.json and report.txt.
void write_report(const ScoreReport& report, const std::filesystem::path& out_dir);

}  // namespace cif

#endif  // CIF_COMMANDS_HPP_
