// cif/labels.hpp

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

// Supervision derived from a bilingual transcript: language tags, the two
// monolingual target streams, per-language token counts and language-change
// flags. Everything here is computed on the fly from the mixture targets.

#ifndef CIF_LABELS_HPP_
#define CIF_LABELS_HPP_

#include <optional>
#include <string>
#include <vector>

#include "cif/types.hpp"

namespace cif {

// Token ids: 0 = <sos> (decoder start), 1 = </s>, then n_ma Mandarin-like
// units, then n_en English-like units.
class Vocabulary {
 public:
  static constexpr TokenId kSos = 0;
  static constexpr TokenId kEos = 1;

  Vocabulary() = default;
  Vocabulary(std::size_t n_ma, std::size_t n_en) : n_ma_(n_ma), n_en_(n_en) {}

  std::size_t n_ma() const { return n_ma_; }
  std::size_t n_en() const { return n_en_; }
  std::size_t size() const { return 2 + n_ma_ + n_en_; }

  TokenId ma_id(std::size_t i) const;
  TokenId en_id(std::size_t i) const;
  bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < size(); }
  bool is_special(TokenId id) const { return id == kSos || id == kEos; }

  // Language partition of `id`; nullopt for specials. Throws ContractError
  // for ids outside the vocabulary.
  std::optional<Lang> lang_of(TokenId id) const;

  // Surface form: a CJK ideograph for Mandarin-like ids, an ASCII word for
  // English-like ids, "</s>" / "<s>" for specials.
  std::string render(TokenId id) const;
  std::optional<TokenId> parse(const std::string& unit) const;

  bool operator==(const Vocabulary&) const = default;

 private:
  std::size_t n_ma_ = 0;
  std::size_t n_en_ = 0;
};

enum class TokenTag { kMa, kEn, kSpecial };

std::vector<TokenTag> tag_languages(const TokenSequence& tokens, const Vocabulary& vocab);

struct BilingualTranscript {
  TokenSequence tokens;     // content tokens, then an optional trailing </s>
  std::vector<Lang> langs;  // one per content token
  bool has_terminator = false;

  std::size_t content_size() const { return langs.size(); }
  bool operator==(const BilingualTranscript&) const = default;
};

// Tags content tokens through the vocabulary. `tokens` may end in </s>;
// throws ContractError on specials elsewhere or unknown ids.
BilingualTranscript make_transcript(const TokenSequence& tokens, const Vocabulary& vocab);

// Checks the transcript invariants; throws ContractError.
void validate(const BilingualTranscript& t);

// Language of every token including the terminator, which takes the
// language of the last content token (Mandarin if there is none).
std::vector<Lang> token_languages(const BilingualTranscript& t);

struct MonolingualTargets {
  TokenSequence ma;
  TokenSequence en;
};

// Order-preserving partition by language without placeholders; </s> goes to
// the stream of the last content token.
MonolingualTargets split_monolingual(const BilingualTranscript& t);

// Inverse of split_monolingual given the original tags.
TokenSequence interleave(const MonolingualTargets& streams, const std::vector<Lang>& langs,
                         bool has_terminator);

struct QuantityTargets {
  std::size_t u_ma = 0;
  std::size_t u_en = 0;
  std::size_t u_mix = 0;

  bool operator==(const QuantityTargets&) const = default;
};

QuantityTargets quantity_targets(const BilingualTranscript& t);

// Which token of a switch pair carries the change flag.
enum class LcdConvention {
  kFirstAfter,  // flags[i] = lang[i] != lang[i-1], flags[0] = 0
  kLastBefore,  // flags[i] = lang[i] != lang[i+1], last flag 0
};

struct LanguageChangeTargets {
  std::vector<double> flags;  // 0/1 per mixture token
};

LanguageChangeTargets lcd_targets(const BilingualTranscript& t,
                                  LcdConvention convention = LcdConvention::kFirstAfter);

// Number of adjacent content-token pairs whose languages differ.
std::size_t count_switch_points(const BilingualTranscript& t);

}  // namespace cif

#endif  // CIF_LABELS_HPP_
