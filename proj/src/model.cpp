// src/model.cpp

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

#include "cif/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "cif/errors.hpp"
#include "cif/random.hpp"

namespace cif {

namespace {

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<double> uniform_init(std::size_t n, double limit, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-limit, limit);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

bool has_prefix(const std::string& name, const std::vector<std::string>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(),
                     [&](const std::string& p) { return name.rfind(p, 0) == 0; });
}

}  // namespace

void validate(const ModelConfig& cfg) {
  auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
  if (cfg.feat_dim == 0) fail("feat_dim must be positive");
  if (cfg.n_ma + cfg.n_en == 0) fail("vocabulary has no units");
  if (cfg.d_model == 0 || cfg.ffn_dim == 0) fail("dimensions must be positive");
  if (cfg.decoder_heads == 0 || cfg.d_model % cfg.decoder_heads != 0) {
    fail("d_model must be a multiple of decoder_heads");
  }
  if (cfg.encoder_kernel % 2 == 0) fail("encoder_kernel must be odd");
  if (cfg.estimator_kernels.empty()) fail("estimator needs at least one layer");
  for (auto k : cfg.estimator_kernels) {
    if (k % 2 == 0) fail("estimator kernel sizes must be odd");
  }
  if (cfg.estimator_filters == 0) fail("estimator_filters must be positive");
  if (cfg.max_tokens == 0) fail("max_tokens must be positive");
  if (!(cfg.dropout >= 0.0 && cfg.dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (!(cfg.weight_dropout >= 0.0 && cfg.weight_dropout < 1.0)) {
    fail("weight_dropout must be in [0, 1)");
  }
  if (!(cfg.firing.beta > 0.0)) fail("firing.beta must be positive");
  if (!(cfg.firing.tail_threshold >= 0.0 && cfg.firing.tail_threshold <= 1.0)) {
    fail("firing.tail_threshold must be in [0, 1]");
  }
  const auto& l = cfg.loss;
  if (!(l.lambda_ctc >= 0 && l.lambda_qua >= 0 && l.lambda_nar >= 0 && l.lambda_lcd >= 0)) {
    fail("loss weights must be non-negative");
  }
  if (!(cfg.frame_shift_ms > 0.0)) fail("frame_shift_ms must be positive");
}

// ---- construction -------------------------------------------------------------

void CifModel::add_linear(const std::string& name, std::size_t in, std::size_t out,
                          std::uint64_t seed) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  params_.add(name + ".w", {in, out},
              uniform_init(in * out, limit, derive_seed(seed, name_hash(name + ".w"))));
  params_.add(name + ".b", {out}, std::vector<double>(out, 0.0));
}

void CifModel::add_conv(const std::string& name, std::size_t k, std::size_t in, std::size_t out,
                        std::uint64_t seed) {
  const double limit = std::sqrt(6.0 / static_cast<double>(k * in + out));
  params_.add(name + ".w", {k * in, out},
              uniform_init(k * in * out, limit, derive_seed(seed, name_hash(name + ".w"))));
  params_.add(name + ".b", {out}, std::vector<double>(out, 0.0));
}

void CifModel::add_norm(const std::string& name, std::size_t dim) {
  params_.add(name + ".g", {dim}, std::vector<double>(dim, 1.0));
  params_.add(name + ".b", {dim}, std::vector<double>(dim, 0.0));
}

void CifModel::add_transformer(const std::string& name, std::uint64_t seed) {
  const std::size_t d = cfg_.d_model;
  add_norm(name + ".ln1", d);
  add_linear(name + ".q", d, d, seed);
  add_linear(name + ".k", d, d, seed);
  add_linear(name + ".v", d, d, seed);
  add_linear(name + ".o", d, d, seed);
  add_norm(name + ".ln2", d);
  add_linear(name + ".ff1", d, cfg_.ffn_dim, seed);
  add_linear(name + ".ff2", cfg_.ffn_dim, d, seed);
}

CifModel::CifModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), vocab_(cfg.n_ma, cfg.n_en) {
  validate(cfg_);
  const std::size_t d = cfg_.d_model, v = vocab_.size();

  add_conv("enc.in", cfg_.encoder_kernel, cfg_.feat_dim, d, seed);
  for (std::size_t b = 0; b < cfg_.encoder_blocks; ++b) {
    const std::string n = "enc.block" + std::to_string(b);
    add_norm(n + ".ln1", d);
    add_linear(n + ".ff1", d, cfg_.ffn_dim, seed);
    add_linear(n + ".ff2", cfg_.ffn_dim, d, seed);
    add_norm(n + ".ln2", d);
    add_conv(n + ".conv", cfg_.encoder_kernel, d, d, seed);
  }

  const std::vector<std::string> estimators =
      cfg_.use_lswe ? std::vector<std::string>{"est.ma", "est.en"}
                    : std::vector<std::string>{"est.shared"};
  for (const auto& e : estimators) {
    std::size_t in = d;
    for (std::size_t i = 0; i < cfg_.estimator_kernels.size(); ++i) {
      add_conv(e + ".conv" + std::to_string(i), cfg_.estimator_kernels[i], in,
               cfg_.estimator_filters, seed);
      in = cfg_.estimator_filters;
    }
    add_linear(e + ".out", in, 1, seed);
  }

  auto embed = [&](const std::string& name) {
    params_.add(name, {v, d},
                uniform_init(v * d, std::sqrt(3.0 / static_cast<double>(d)),
                             derive_seed(seed, name_hash(name))));
  };
  embed("ar.embed");
  for (std::size_t l = 0; l < cfg_.decoder_layers; ++l) {
    add_transformer("ar.layer" + std::to_string(l), seed);
  }
  add_norm("ar.ln", d);
  add_linear("ar.out", d, v, seed);

  if (cfg_.use_nar) {
    for (std::size_t l = 0; l < cfg_.decoder_layers; ++l) {
      add_transformer("nar.layer" + std::to_string(l), seed);
    }
    add_norm("nar.ln", d);
    add_linear("nar.out", d, v, seed);
  }
  if (cfg_.use_lcd) {
    embed("lcd.embed");
    add_linear("lcd.in", 2 * d, d, seed);
    for (std::size_t l = 0; l < cfg_.decoder_layers; ++l) {
      add_transformer("lcd.layer" + std::to_string(l), seed);
    }
    add_norm("lcd.ln", d);
    add_linear("lcd.out", d, 1, seed);
  }
  add_linear("ctc.out", d, v + 1, seed);

  std::vector<double> pe(cfg_.max_tokens * d);
  for (std::size_t pos = 0; pos < cfg_.max_tokens; ++pos) {
    for (std::size_t i = 0; i < d; i += 2) {
      const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(d));
      pe[pos * d + i] = std::sin(static_cast<double>(pos) * freq);
      if (i + 1 < d) pe[pos * d + i + 1] = std::cos(static_cast<double>(pos) * freq);
    }
  }
  pos_table_ = Tensor::matrix(cfg_.max_tokens, d, std::move(pe));
}

std::vector<Tensor> CifModel::inference_parameters() const {
  return params_.tensors_with_prefix(inference_prefixes());
}

std::size_t CifModel::inference_parameter_count() const {
  return params_.scalar_count_with_prefix(inference_prefixes());
}

// ---- building blocks ----------------------------------------------------------

Tensor CifModel::linear(const Tensor& x, const std::string& name) const {
  return add(matmul(x, p(name + ".w")), p(name + ".b"));
}

Tensor CifModel::residual_dropout(const Tensor& x, Mode mode, std::uint64_t seed) const {
  if (mode == Mode::kEval || cfg_.dropout == 0.0) return x;
  return dropout(x, cfg_.dropout, seed);
}

Tensor CifModel::ffn(const Tensor& x, const std::string& name, Mode mode,
                     std::uint64_t seed) const {
  Tensor z = relu(linear(x, name + ".ff1"));
  return residual_dropout(linear(z, name + ".ff2"), mode, seed);
}

Tensor CifModel::attention(const Tensor& x, const std::string& name, bool causal) const {
  const std::size_t heads = cfg_.decoder_heads, dk = cfg_.d_model / heads;
  Tensor q = linear(x, name + ".q"), k = linear(x, name + ".k"), v = linear(x, name + ".v");
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Tensor> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * dk, (h + 1) * dk);
    Tensor kh = slice_cols(k, h * dk, (h + 1) * dk);
    Tensor vh = slice_cols(v, h * dk, (h + 1) * dk);
    Tensor a = softmax(scale(matmul(qh, transpose(kh)), inv), causal);
    outs.push_back(matmul(a, vh));
  }
  Tensor cat = heads == 1 ? outs[0] : concat_cols(outs);
  return linear(cat, name + ".o");
}

Tensor CifModel::transformer_layer(const Tensor& x, const std::string& name, bool causal,
                                   Mode mode, std::uint64_t seed) const {
  Tensor a = attention(layer_norm(x, p(name + ".ln1.g"), p(name + ".ln1.b")), name, causal);
  Tensor y = add(x, residual_dropout(a, mode, derive_seed(seed, 0)));
  Tensor f = ffn(layer_norm(y, p(name + ".ln2.g"), p(name + ".ln2.b")), name, mode,
                 derive_seed(seed, 1));
  return add(y, f);
}

Tensor CifModel::decoder_stack(Tensor x, const std::string& name, bool causal, Mode mode,
                               std::uint64_t seed) const {
  for (std::size_t l = 0; l < cfg_.decoder_layers; ++l) {
    x = transformer_layer(x, name + ".layer" + std::to_string(l), causal, mode,
                          derive_seed(seed, l));
  }
  return layer_norm(x, p(name + ".ln.g"), p(name + ".ln.b"));
}

Tensor CifModel::positions(std::size_t n) const {
  if (n > cfg_.max_tokens) {
    throw ContractError("token sequence of length " + std::to_string(n) + " exceeds max_tokens " +
                        std::to_string(cfg_.max_tokens));
  }
  return slice_rows(pos_table_, 0, n);
}

// ---- forward passes -------------------------------------------------------------

Tensor CifModel::encode(const Tensor& x, Mode mode, std::uint64_t seed) const {
  if (x.rank() != 2 || x.cols() != cfg_.feat_dim) {
    throw DimensionError("encode: expected [T, " + std::to_string(cfg_.feat_dim) + "] features");
  }
  if (x.rows() < kDownsample) {
    throw ContractError("encode: utterance of " + std::to_string(x.rows()) +
                        " frames is shorter than the downsampling factor " +
                        std::to_string(kDownsample));
  }
  const std::size_t k = cfg_.encoder_kernel;
  Tensor h = relu(conv1d(x, p("enc.in.w"), p("enc.in.b"), k));
  h = subsample_rows(h, 2);
  const std::size_t pool_at = cfg_.encoder_blocks / 2;
  bool pooled = false;
  for (std::size_t b = 0; b < cfg_.encoder_blocks; ++b) {
    if (b == pool_at) {
      h = max_pool_rows(h, 2);
      pooled = true;
    }
    const std::string n = "enc.block" + std::to_string(b);
    h = add(h, ffn(layer_norm(h, p(n + ".ln1.g"), p(n + ".ln1.b")), n, mode,
                   derive_seed(seed, 2 * b)));
    Tensor c = relu(conv1d(layer_norm(h, p(n + ".ln2.g"), p(n + ".ln2.b")), p(n + ".conv.w"),
                           p(n + ".conv.b"), k));
    h = add(h, residual_dropout(c, mode, derive_seed(seed, 2 * b + 1)));
  }
  if (!pooled) h = max_pool_rows(h, 2);
  return h;
}

WeightSequence CifModel::estimate_weights(const Tensor& h, Estimator which) const {
  std::string name;
  Stream stream = Stream::kMix;
  switch (which) {
    case Estimator::kMa:
      name = "est.ma";
      stream = Stream::kMa;
      break;
    case Estimator::kEn:
      name = "est.en";
      stream = Stream::kEn;
      break;
    case Estimator::kShared:
      name = "est.shared";
      break;
  }
  if (!params_.contains(name + ".out.w")) {
    throw ContractError("estimate_weights: estimator " + name + " not present in this model");
  }
  Tensor z = h;
  for (std::size_t i = 0; i < cfg_.estimator_kernels.size(); ++i) {
    const std::string n = name + ".conv" + std::to_string(i);
    z = relu(conv1d(z, p(n + ".w"), p(n + ".b"), cfg_.estimator_kernels[i]));
  }
  Tensor a = sigmoid(linear(z, name + ".out"));
  return {stream, reshape(a, {a.rows()}), cfg_.frame_shift_ms * kDownsample};
}

Tensor CifModel::ar_decode(const Tensor& c_mix, std::span<const TokenId> y_in, Mode mode,
                           std::uint64_t seed) const {
  if (c_mix.rank() != 2 || c_mix.rows() != y_in.size()) {
    throw ContractError("ar_decode: embeddings and token prefix differ in length");
  }
  Tensor x = add(add(embedding(p("ar.embed"), y_in), c_mix), positions(y_in.size()));
  x = decoder_stack(x, "ar", true, mode, seed);
  return linear(x, "ar.out");
}

Tensor CifModel::ar_decode_step(const Tensor& c_prefix, std::span<const TokenId> y_prefix) const {
  if (y_prefix.empty()) throw ContractError("ar_decode_step: empty prefix");
  Tensor logits = ar_decode(c_prefix, y_prefix, Mode::kEval, 0);
  Tensor last = slice_rows(logits, logits.rows() - 1, logits.rows());
  return reshape(last, {last.cols()});
}

Tensor CifModel::nar_decode(const Tensor& c, Mode mode, std::uint64_t seed) const {
  if (!cfg_.use_nar) throw ContractError("nar_decode: model built without the NAR decoder");
  if (c.rank() != 2 || c.rows() == 0) throw ContractError("nar_decode: needs U >= 1 embeddings");
  Tensor x = add(c, positions(c.rows()));
  x = decoder_stack(x, "nar", false, mode, seed);
  return linear(x, "nar.out");
}

Tensor CifModel::lcd_forward(const Tensor& c_mix, std::span<const TokenId> y_prev, Mode mode,
                             std::uint64_t seed) const {
  if (!cfg_.use_lcd) throw ContractError("lcd_forward: model built without the LCD module");
  if (c_mix.rank() != 2 || c_mix.rows() != y_prev.size()) {
    throw ContractError("lcd_forward: embeddings and previous tokens differ in length");
  }
  const Tensor parts[] = {embedding(p("lcd.embed"), y_prev), c_mix};
  Tensor x = add(linear(concat_cols(parts), "lcd.in"), positions(y_prev.size()));
  x = decoder_stack(x, "lcd", true, mode, seed);
  Tensor z = sigmoid(linear(x, "lcd.out"));
  return reshape(z, {z.rows()});
}

Tensor CifModel::ctc_logits(const Tensor& h) const { return linear(h, "ctc.out"); }

TrainForward CifModel::forward_train(const Tensor& x, const BilingualTranscript& t,
                                     std::uint64_t seed) const {
  validate(t);
  const TokenSequence& y = t.tokens;
  const QuantityTargets q = quantity_targets(t);
  const MonolingualTargets mono = split_monolingual(t);

  TrainForward out;
  Tensor h = encode(x, Mode::kTrain, derive_seed(seed, 1));
  LossTerms terms;
  if (cfg_.use_lswe) {
    out.alpha_ma = estimate_weights(h, Estimator::kMa);
    out.alpha_en = estimate_weights(h, Estimator::kEn);
    out.alpha_mix = fuse_weights(out.alpha_ma, out.alpha_en, cfg_.weight_dropout, Mode::kTrain,
                                 derive_seed(seed, 2));
    terms.quantity = quantity_loss(out.alpha_ma, out.alpha_en, out.alpha_mix, q);
  } else {
    out.alpha_mix = estimate_weights(h, Estimator::kShared);
    terms.quantity = quantity_loss_mix_only(out.alpha_mix, q.u_mix);
  }

  out.fired_mix = integrate_and_fire(h, scale_weights(out.alpha_mix, q.u_mix), cfg_.firing,
                                     Mode::kTrain);
  TokenSequence y_in;
  if (!y.empty()) {
    y_in.push_back(Vocabulary::kSos);
    y_in.insert(y_in.end(), y.begin(), y.end() - 1);
    terms.ar_ce = ar_ce_loss(ar_decode(out.fired_mix.embeddings, y_in, Mode::kTrain,
                                       derive_seed(seed, 3)),
                             y);
  }

  if (cfg_.loss.lambda_ctc > 0.0) {
    try {
      terms.ctc = ctc_loss(ctc_logits(h), y, blank_id());
    } catch (const InfeasibleAlignmentError&) {
      // Too few encoder frames for the label sequence: no CTC signal.
    }
  }

  if (cfg_.use_nar && !y.empty()) {
    auto stream_logits = [&](const WeightSequence& raw, const TokenSequence& target,
                             std::uint64_t s) {
      if (target.empty()) return Tensor();
      FiringResult f =
          integrate_and_fire(h, scale_weights(raw, target.size()), cfg_.firing, Mode::kTrain);
      return nar_decode(f.embeddings, Mode::kTrain, s);
    };
    const WeightSequence& src_ma = cfg_.use_lswe ? out.alpha_ma : out.alpha_mix;
    const WeightSequence& src_en = cfg_.use_lswe ? out.alpha_en : out.alpha_mix;
    Tensor lm = stream_logits(src_ma, mono.ma, derive_seed(seed, 4));
    Tensor le = stream_logits(src_en, mono.en, derive_seed(seed, 5));
    terms.nar_ce = nar_ce_loss(lm, mono.ma, le, mono.en);
  }

  if (cfg_.use_lcd && !y.empty()) {
    Tensor probs = lcd_forward(out.fired_mix.embeddings, y_in, Mode::kTrain, derive_seed(seed, 6));
    terms.lcd_bce = lcd_bce_loss(probs, lcd_targets(t, cfg_.lcd_convention));
  }

  out.loss = combine(terms, cfg_.loss);
  return out;
}

// ---- inference ---------------------------------------------------------------------

Hypothesis CifModel::beam_search(const Tensor& c_mix, std::size_t beam) const {
  if (beam == 0) throw ContractError("beam_search: beam must be >= 1");
  NoGradGuard no_grad;
  const std::size_t steps = c_mix.rows();
  const std::size_t v = vocab_.size();
  std::vector<Hypothesis> live{Hypothesis{}}, finished;
  for (std::size_t step = 0; step < steps && !live.empty(); ++step) {
    Tensor c_prefix = slice_rows(c_mix, 0, step + 1);
    std::vector<Hypothesis> cand;
    cand.reserve(live.size() * v);
    for (const auto& hyp : live) {
      TokenSequence y_in{Vocabulary::kSos};
      y_in.insert(y_in.end(), hyp.tokens.begin(), hyp.tokens.end());
      Tensor lp = log_softmax(ar_decode_step(c_prefix, y_in));
      auto L = lp.data();
      for (std::size_t id = 0; id < v; ++id) {
        if (static_cast<TokenId>(id) == Vocabulary::kSos) continue;
        Hypothesis next = hyp;
        next.tokens.push_back(static_cast<TokenId>(id));
        next.log_prob += L[id];
        cand.push_back(std::move(next));
      }
    }
    // Highest score first; ties resolved by token sequence so results do not
    // depend on candidate order.
    std::sort(cand.begin(), cand.end(), [](const Hypothesis& a, const Hypothesis& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      return a.tokens < b.tokens;
    });
    if (cand.size() > beam) cand.resize(beam);
    live.clear();
    for (auto& c : cand) {
      (c.tokens.back() == Vocabulary::kEos ? finished : live).push_back(std::move(c));
    }
  }
  for (auto& h : live) finished.push_back(std::move(h));
  if (finished.empty()) return {};
  return *std::min_element(finished.begin(), finished.end(),
                           [](const Hypothesis& a, const Hypothesis& b) {
                             if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
                             return a.tokens < b.tokens;
                           });
}

InferenceResult CifModel::infer(const Tensor& x, std::size_t beam) const {
  NoGradGuard no_grad;
  InferenceResult r;
  Tensor h = encode(x, Mode::kEval);
  if (cfg_.use_lswe) {
    r.alpha_ma = estimate_weights(h, Estimator::kMa);
    r.alpha_en = estimate_weights(h, Estimator::kEn);
    r.alpha_mix = fuse_weights(r.alpha_ma, r.alpha_en, cfg_.weight_dropout, Mode::kEval, 0);
  } else {
    r.alpha_mix = estimate_weights(h, Estimator::kShared);
  }
  r.fired_mix = integrate_and_fire(h, r.alpha_mix, cfg_.firing, Mode::kEval);
  r.best = beam_search(r.fired_mix.embeddings, beam);
  for (std::size_t i = 0; i < r.best.tokens.size() && i < r.fired_mix.size(); ++i) {
    if (r.best.tokens[i] != Vocabulary::kEos) r.boundaries.push_back(r.fired_mix.boundaries[i]);
  }
  return r;
}

// ---- persistence ---------------------------------------------------------------------

void CifModel::save(const std::filesystem::path& path) const {
  std::vector<NamedTensor> out;
  for (const auto& n : params_.names()) out.push_back({n, params_.get(n)});
  save_tensors(path, out);
}

void CifModel::load(const std::filesystem::path& path, bool require_auxiliary) {
  const auto loaded = load_tensors(path);
  std::set<std::string> seen;
  for (const auto& [name, t] : loaded) {
    if (!params_.contains(name)) {
      if (has_prefix(name, auxiliary_prefixes())) continue;
      throw DataError(path.string() + ": unexpected tensor " + name);
    }
    Tensor& dst = params_.get(name);
    if (dst.shape() != t.shape()) {
      throw DataError(path.string() + ": tensor " + name + " has shape " + shape_str(t.shape()) +
                      ", model expects " + shape_str(dst.shape()));
    }
    auto src = t.data();
    std::copy(src.begin(), src.end(), dst.mutable_data().begin());
    seen.insert(name);
  }
  for (const auto& n : params_.names()) {
    if (seen.count(n)) continue;
    if (has_prefix(n, inference_prefixes()) || require_auxiliary) {
      throw DataError(path.string() + ": missing tensor " + n);
    }
  }
}

}  // namespace cif
