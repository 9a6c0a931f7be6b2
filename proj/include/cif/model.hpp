// cif/model.hpp

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

// The trainable recognizer: a convolutional encoder, language-specific weight
// estimators feeding three CIF streams, an autoregressive decoder on the
// mixture stream, and three training-only heads (non-autoregressive decoder
// on the monolingual streams, language-change detector, CTC on the encoder).
//
// Parameter names carry a module prefix:
//   enc.  est.  ar.   used at inference
//   nar.  lcd.  ctc.  training only
// Inference never touches the second group, so it may be absent from a
// checkpoint that is only evaluated.

#ifndef CIF_MODEL_HPP_
#define CIF_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cif/checkpoint.hpp"
#include "cif/cif.hpp"
#include "cif/labels.hpp"
#include "cif/losses.hpp"
#include "cif/tensor.hpp"

namespace cif {

struct ModelConfig {
  std::size_t feat_dim = 8;
  std::size_t n_ma = 19;
  std::size_t n_en = 19;

  std::size_t d_model = 32;
  std::size_t ffn_dim = 64;
  std::size_t encoder_blocks = 2;
  std::size_t encoder_kernel = 3;

  std::vector<std::size_t> estimator_kernels{3, 1, 3};
  std::size_t estimator_filters = 32;

  std::size_t decoder_layers = 1;
  std::size_t decoder_heads = 2;
  std::size_t max_tokens = 128;

  // Residual dropout inside encoder and decoders.
  double dropout = 0.1;
  // Dropout on the two language weight streams before they are summed.
  double weight_dropout = 0.1;

  FiringConfig firing;
  LossWeights loss;
  LcdConvention lcd_convention = LcdConvention::kFirstAfter;

  bool use_lswe = true;
  bool use_nar = true;
  bool use_lcd = true;

  // Input frame shift; encoder frames are 4x longer.
  double frame_shift_ms = 10.0;

  Vocabulary vocab() const { return Vocabulary(n_ma, n_en); }
};

// Throws ConfigError on inconsistent values.
void validate(const ModelConfig& cfg);

inline constexpr std::size_t kDownsample = 4;

enum class Estimator { kMa, kEn, kShared };

// Everything a training forward pass produces besides the loss.
struct TrainForward {
  CombinedLoss loss;
  WeightSequence alpha_ma, alpha_en, alpha_mix;  // raw; ma/en undefined without LSWE
  FiringResult fired_mix;
};

struct Hypothesis {
  TokenSequence tokens;  // may end in </s>
  double log_prob = 0.0;
};

struct InferenceResult {
  Hypothesis best;
  WeightSequence alpha_ma, alpha_en, alpha_mix;
  FiringResult fired_mix;
  // Fired frames of the content (non-</s>) tokens of the hypothesis.
  std::vector<std::size_t> boundaries;
};

class CifModel {
 public:
  // Parameters drawn from `seed`; auxiliary heads are only created when
  // enabled.
  CifModel(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }
  TokenId blank_id() const { return static_cast<TokenId>(vocab_.size()); }

  ParameterStore& params() { return params_; }
  const ParameterStore& params() const { return params_; }
  std::vector<Tensor> inference_parameters() const;
  std::size_t inference_parameter_count() const;

  // x [T, F] -> h [ceil(T/4), D]. Throws ContractError when T < 4. `seed`
  // drives dropout in train mode.
  Tensor encode(const Tensor& x, Mode mode = Mode::kEval, std::uint64_t seed = 0) const;

  WeightSequence estimate_weights(const Tensor& h, Estimator which) const;

  // Teacher-forced decoder pass. y_in holds the previous token of every
  // position (<sos> first); returns [U, V] logits.
  Tensor ar_decode(const Tensor& c_mix, std::span<const TokenId> y_in, Mode mode = Mode::kEval,
                   std::uint64_t seed = 0) const;
  // Next-token logits [V] after the prefix; both prefixes have equal length.
  Tensor ar_decode_step(const Tensor& c_prefix, std::span<const TokenId> y_prefix) const;

  // Non-causal decoding of monolingual embeddings [U, D] -> [U, V].
  Tensor nar_decode(const Tensor& c, Mode mode = Mode::kEval, std::uint64_t seed = 0) const;

  // Change probabilities [U] from previous tokens and mixture embeddings.
  Tensor lcd_forward(const Tensor& c_mix, std::span<const TokenId> y_prev,
                     Mode mode = Mode::kEval, std::uint64_t seed = 0) const;

  Tensor ctc_logits(const Tensor& h) const;

  // Full joint objective for one utterance.
  TrainForward forward_train(const Tensor& x, const BilingualTranscript& t,
                             std::uint64_t seed) const;

  // Beam search over the fired mixture embeddings. Runs without recording a
  // graph.
  InferenceResult infer(const Tensor& x, std::size_t beam) const;
  // Search over given embeddings [U, D]; exposed for tests.
  Hypothesis beam_search(const Tensor& c_mix, std::size_t beam) const;

  void save(const std::filesystem::path& path) const;
  // Loads matching tensors. Inference parameters are required; training-only
  // ones are required only when `require_auxiliary`. Shape mismatches and
  // unknown names are DataErrors.
  void load(const std::filesystem::path& path, bool require_auxiliary);

 private:
  Tensor linear(const Tensor& x, const std::string& name) const;
  Tensor ffn(const Tensor& x, const std::string& name, Mode mode, std::uint64_t seed) const;
  Tensor attention(const Tensor& x, const std::string& name, bool causal) const;
  Tensor transformer_layer(const Tensor& x, const std::string& name, bool causal, Mode mode,
                           std::uint64_t seed) const;
  Tensor positions(std::size_t n) const;
  Tensor residual_dropout(const Tensor& x, Mode mode, std::uint64_t seed) const;
  Tensor decoder_stack(Tensor x, const std::string& name, bool causal, Mode mode,
                       std::uint64_t seed) const;

  void add_linear(const std::string& name, std::size_t in, std::size_t out, std::uint64_t seed);
  void add_conv(const std::string& name, std::size_t k, std::size_t in, std::size_t out,
                std::uint64_t seed);
  void add_norm(const std::string& name, std::size_t dim);
  void add_transformer(const std::string& name, std::uint64_t seed);
  const Tensor& p(const std::string& name) const { return params_.get(name); }

  ModelConfig cfg_;
  Vocabulary vocab_;
  ParameterStore params_;
  Tensor pos_table_;  // [max_tokens, D], fixed
};

inline const std::vector<std::string>& inference_prefixes() {
  static const std::vector<std::string> k{"enc.", "est.", "ar."};
  return k;
}

inline const std::vector<std::string>& auxiliary_prefixes() {
  static const std::vector<std::string> k{"nar.", "lcd.", "ctc."};
  return k;
}

}  // namespace cif

#endif  // CIF_MODEL_HPP_
