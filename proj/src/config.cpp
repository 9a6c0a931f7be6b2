// src/config.cpp

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

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "cif/errors.hpp"

namespace cif {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::string fmt(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  (void)ec;
  return std::string(buf, p);
}

std::string fmt(std::size_t x) { return std::to_string(x); }
std::string fmt(bool x) { return x ? "true" : "false"; }

struct Option {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename F>
Option size_opt(std::string key, F field) {
  return {key, [field](const RunConfig& c) { return fmt(static_cast<std::size_t>(field(c))); },
          [field, key](RunConfig& c, const std::string& v) { field(c) = parse_size(key, v); }};
}

template <typename F>
Option double_opt(std::string key, F field) {
  return {key, [field](const RunConfig& c) { return fmt(static_cast<double>(field(c))); },
          [field, key](RunConfig& c, const std::string& v) { field(c) = parse_double(key, v); }};
}

template <typename F>
Option bool_opt(std::string key, F field) {
  return {key, [field](const RunConfig& c) { return fmt(static_cast<bool>(field(c))); },
          [field, key](RunConfig& c, const std::string& v) { field(c) = parse_bool(key, v); }};
}

template <typename F>
Option path_opt(std::string key, F field) {
  return {key, [field](const RunConfig& c) { return field(c).string(); },
          [field](RunConfig& c, const std::string& v) { field(c) = v; }};
}

#define FIELD(expr) [](auto& c) -> auto& { return expr; }

const std::vector<Option>& options() {
  static const std::vector<Option> k = [] {
    std::vector<Option> o;
    o.push_back({"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& v) { c.seed = parse_size("seed", v); }});

    o.push_back(size_opt("data.n_ma", FIELD(c.data.n_ma)));
    o.push_back(size_opt("data.n_en", FIELD(c.data.n_en)));
    o.push_back(size_opt("data.feat_dim", FIELD(c.data.feat_dim)));
    o.push_back(size_opt("data.ma_min_frames", FIELD(c.data.ma_min_frames)));
    o.push_back(size_opt("data.ma_max_frames", FIELD(c.data.ma_max_frames)));
    o.push_back(size_opt("data.en_min_frames", FIELD(c.data.en_min_frames)));
    o.push_back(size_opt("data.en_max_frames", FIELD(c.data.en_max_frames)));
    o.push_back(size_opt("data.silence_min_frames", FIELD(c.data.silence_min_frames)));
    o.push_back(size_opt("data.silence_max_frames", FIELD(c.data.silence_max_frames)));
    o.push_back(size_opt("data.min_tokens", FIELD(c.data.min_tokens)));
    o.push_back(size_opt("data.max_tokens", FIELD(c.data.max_tokens)));
    o.push_back(double_opt("data.sigma", FIELD(c.data.sigma)));
    o.push_back(double_opt("data.switch_prob", FIELD(c.data.switch_prob)));
    o.push_back(double_opt("data.en_similarity", FIELD(c.data.en_similarity)));
    o.push_back(bool_opt("data.allow_repeats", FIELD(c.data.allow_repeats)));
    o.push_back(double_opt("data.frame_shift_ms", FIELD(c.data.frame_shift_ms)));
    o.push_back(size_opt("data.utterances", FIELD(c.data_utterances)));
    o.push_back(size_opt("data.offset", FIELD(c.data_offset)));
    o.push_back(bool_opt("data.binary", FIELD(c.data_binary)));

    o.push_back(size_opt("model.d_model", FIELD(c.model.d_model)));
    o.push_back(size_opt("model.ffn_dim", FIELD(c.model.ffn_dim)));
    o.push_back(size_opt("model.encoder_blocks", FIELD(c.model.encoder_blocks)));
    o.push_back(size_opt("model.encoder_kernel", FIELD(c.model.encoder_kernel)));
    o.push_back({"model.estimator_kernels",
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t k : c.model.estimator_kernels) {
                     if (!s.empty()) s += ',';
                     s += std::to_string(k);
                   }
                   return s;
                 },
                 [](RunConfig& c, const std::string& v) {
                   std::vector<std::size_t> ks;
                   std::stringstream ss(v);
                   std::string item;
                   while (std::getline(ss, item, ',')) {
                     ks.push_back(parse_size("model.estimator_kernels", trim(item)));
                   }
                   c.model.estimator_kernels = ks;
                 }});
    o.push_back(size_opt("model.estimator_filters", FIELD(c.model.estimator_filters)));
    o.push_back(size_opt("model.decoder_layers", FIELD(c.model.decoder_layers)));
    o.push_back(size_opt("model.decoder_heads", FIELD(c.model.decoder_heads)));
    o.push_back(size_opt("model.max_tokens", FIELD(c.model.max_tokens)));
    o.push_back(double_opt("model.dropout", FIELD(c.model.dropout)));
    o.push_back(double_opt("model.weight_dropout", FIELD(c.model.weight_dropout)));
    o.push_back(bool_opt("model.use_lswe", FIELD(c.model.use_lswe)));
    o.push_back(bool_opt("model.use_nar", FIELD(c.model.use_nar)));
    o.push_back(bool_opt("model.use_lcd", FIELD(c.model.use_lcd)));
    o.push_back({"model.lcd_convention",
                 [](const RunConfig& c) {
                   return std::string(c.model.lcd_convention == LcdConvention::kFirstAfter
                                          ? "first_after"
                                          : "last_before");
                 },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "first_after") {
                     c.model.lcd_convention = LcdConvention::kFirstAfter;
                   } else if (v == "last_before") {
                     c.model.lcd_convention = LcdConvention::kLastBefore;
                   } else {
                     throw ConfigError("model.lcd_convention: expected first_after or last_before, got '" + v + "'");
                   }
                 }});

    o.push_back(double_opt("cif.beta", FIELD(c.model.firing.beta)));
    o.push_back(double_opt("cif.tail_threshold", FIELD(c.model.firing.tail_threshold)));
    o.push_back(bool_opt("cif.normalize_tail", FIELD(c.model.firing.normalize_tail)));

    o.push_back(double_opt("loss.lambda_ctc", FIELD(c.model.loss.lambda_ctc)));
    o.push_back(double_opt("loss.lambda_qua", FIELD(c.model.loss.lambda_qua)));
    o.push_back(double_opt("loss.lambda_nar", FIELD(c.model.loss.lambda_nar)));
    o.push_back(double_opt("loss.lambda_lcd", FIELD(c.model.loss.lambda_lcd)));

    o.push_back(size_opt("train.steps", FIELD(c.train.steps)));
    o.push_back(size_opt("train.batch_size", FIELD(c.train.batch_size)));
    o.push_back(double_opt("train.peak_lr", FIELD(c.train.schedule.peak_lr)));
    o.push_back(double_opt("train.final_lr", FIELD(c.train.schedule.final_lr)));
    o.push_back(size_opt("train.warmup_steps", FIELD(c.train.schedule.warmup_steps)));
    o.push_back(size_opt("train.hold_steps", FIELD(c.train.schedule.hold_steps)));
    o.push_back(size_opt("train.decay_steps", FIELD(c.train.schedule.decay_steps)));
    o.push_back(double_opt("train.adam_beta1", FIELD(c.train.adam.beta1)));
    o.push_back(double_opt("train.adam_beta2", FIELD(c.train.adam.beta2)));
    o.push_back(double_opt("train.adam_eps", FIELD(c.train.adam.eps)));
    o.push_back(double_opt("train.grad_clip", FIELD(c.train.grad_clip)));
    o.push_back(size_opt("train.threads", FIELD(c.train.threads)));
    o.push_back(double_opt("train.speed_perturb", FIELD(c.train.speed_perturb)));
    o.push_back(size_opt("train.valid_every", FIELD(c.valid_every)));
    o.push_back(size_opt("train.valid_beam", FIELD(c.valid_beam)));
    o.push_back(size_opt("train.checkpoint_every", FIELD(c.checkpoint_every)));
    o.push_back(size_opt("train.log_every", FIELD(c.log_every)));

    o.push_back(size_opt("eval.beam", FIELD(c.eval.beam)));
    o.push_back(double_opt("eval.tolerance_ms", FIELD(c.eval.tolerance_ms)));

    o.push_back(path_opt("paths.data", FIELD(c.data_dir)));
    o.push_back(path_opt("paths.valid", FIELD(c.valid_dir)));
    o.push_back(path_opt("paths.out", FIELD(c.out_dir)));
    return o;
  }();
  return k;
}

#undef FIELD

const Option& find(const std::string& key) {
  for (const auto& o : options()) {
    if (o.key == key) return o;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& o : options()) out.push_back(o.key);
  return out;
}

void set_option(RunConfig& cfg, const std::string& key, const std::string& value) {
  find(key).set(cfg, value);
}

std::string get_option(const RunConfig& cfg, const std::string& key) { return find(key).get(cfg); }

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    try {
      set_option(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), path.string());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  set_option(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string dump_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& o : options()) out += o.key + " = " + o.get(cfg) + "\n";
  return out;
}

void write_config_file(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write config file " + path.string());
  out << dump_config(cfg);
  if (!out) throw DataError("error writing " + path.string());
}

ModelConfig resolved_model(const RunConfig& cfg) {
  ModelConfig m = cfg.model;
  m.n_ma = cfg.data.n_ma;
  m.n_en = cfg.data.n_en;
  m.feat_dim = cfg.data.feat_dim;
  m.frame_shift_ms = cfg.data.frame_shift_ms;
  return m;
}

SynthSpec resolved_data(const RunConfig& cfg) {
  SynthSpec s = cfg.data;
  s.seed = cfg.seed;
  return s;
}

void validate(const RunConfig& cfg) {
  validate(cfg.data);
  validate(resolved_model(cfg));
  if (cfg.train.batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (cfg.train.speed_perturb < 0.0 || cfg.train.speed_perturb >= 1.0) {
    throw ConfigError("train.speed_perturb must lie in [0, 1)");
  }
  if (!(cfg.train.schedule.peak_lr > 0.0) || cfg.train.schedule.final_lr < 0.0) {
    throw ConfigError("train learning rates must be positive");
  }
  if (cfg.train.grad_clip < 0.0) throw ConfigError("train.grad_clip must be non-negative");
  if (cfg.valid_beam == 0 || cfg.eval.beam == 0) throw ConfigError("beam width must be positive");
  if (cfg.eval.tolerance_ms < 0.0) throw ConfigError("eval.tolerance_ms must be non-negative");
}

}  // namespace cif
