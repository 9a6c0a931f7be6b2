// cif/config.hpp

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

// Run configuration: every setting of data generation, model, training and
// evaluation behind one dotted key space.
//
// File format: one "key = value" per line; '#' starts a comment; blank lines
// are ignored. Booleans are true/false, lists are comma separated. Unknown
// keys and unparsable values are ConfigErrors.

#ifndef CIF_CONFIG_HPP_
#define CIF_CONFIG_HPP_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cif/model.hpp"
#include "cif/synthdata.hpp"
#include "cif/train.hpp"

namespace cif {

struct EvalConfig {
  std::size_t beam = 10;
  double tolerance_ms = 50.0;
};

struct RunConfig {
  std::uint64_t seed = 7;
  SynthSpec data;
  // Utterance count and stream offset written by gen-data.
  std::size_t data_utterances = 200;
  std::size_t data_offset = 0;
  bool data_binary = false;

  // n_ma, n_en, feat_dim and frame_shift_ms are taken from \`data\`.
  ModelConfig model;
  TrainConfig train;
  // Validation and checkpoint cadence in steps; 0 disables.
  std::size_t valid_every = 500;
  std::size_t valid_beam = 1;
  std::size_t checkpoint_every = 500;
  std::size_t log_every = 100;

  EvalConfig eval;

  std::filesystem::path data_dir;
  std::filesystem::path valid_dir;
  std::filesystem::path out_dir;
};

// All keys in canonical order.
std::vector<std::string> config_keys();

// Sets one key from its textual value.
void set_option(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_option(const RunConfig& cfg, const std::string& key);

// Applies "key = value" lines. `origin` names the source in error messages.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
// "key=value" override as given on the command line.
void apply_override(RunConfig& cfg, const std::string& assignment);

// Every key with its current value, one per line; parses back to `cfg`.
std::string dump_config(const RunConfig& cfg);
void write_config_file(const RunConfig& cfg, const std::filesystem::path& path);

// Model settings with vocabulary, feature size and frame shift taken from
// the data section.
ModelConfig resolved_model(const RunConfig& cfg);
// Generator settings seeded from the run seed.
SynthSpec resolved_data(const RunConfig& cfg);

// Throws ConfigError.
void validate(const RunConfig& cfg);

}  // namespace cif

#endif  // CIF_CONFIG_HPP_
