// src/labels.cpp

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

#include "cif/labels.hpp"

#include <array>

#include "cif/errors.hpp"

namespace cif {

namespace {

// Surface forms for the first few units of each language; later ids fall
// back to generated forms.
constexpr std::array<const char*, 24> kMaChars = {
    "我", "要", "你", "好", "是", "的", "不", "了", "在", "人", "有", "他",
    "这", "中", "大", "来", "上", "国", "个", "到", "说", "们", "为", "子"};
constexpr std::array<const char*, 24> kEnWords = {
    "go",   "home", "the", "we",   "can", "do",   "it",   "now",
    "see",  "you",  "and", "for",  "not", "but",  "this", "that",
    "with", "have", "are", "meet", "ok",  "sure", "plan", "team"};

std::string utf8_encode(char32_t cp) {
  std::string s;
  if (cp < 0x80) {
    s += static_cast<char>(cp);
  } else if (cp < 0x800) {
    s += static_cast<char>(0xC0 | (cp >> 6));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    s += static_cast<char>(0xE0 | (cp >> 12));
    s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    s += static_cast<char>(0xF0 | (cp >> 18));
    s += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    s += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    s += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return s;
}

// Fallback ideographs come from CJK Extension A so they never collide with
// the hand-picked list above.
std::string ma_surface(std::size_t i) {
  if (i < kMaChars.size()) return kMaChars[i];
  return utf8_encode(static_cast<char32_t>(0x3400 + i));
}

std::string en_surface(std::size_t i) {
  if (i < kEnWords.size()) return kEnWords[i];
  return "w" + std::to_string(i);
}

}  // namespace

TokenId Vocabulary::ma_id(std::size_t i) const {
  if (i >= n_ma_) throw ContractError("ma unit index out of range");
  return static_cast<TokenId>(2 + i);
}

TokenId Vocabulary::en_id(std::size_t i) const {
  if (i >= n_en_) throw ContractError("en unit index out of range");
  return static_cast<TokenId>(2 + n_ma_ + i);
}

std::optional<Lang> Vocabulary::lang_of(TokenId id) const {
  if (!contains(id)) throw ContractError("token id " + std::to_string(id) + " not in vocabulary");
  if (is_special(id)) return std::nullopt;
  return static_cast<std::size_t>(id) < 2 + n_ma_ ? Lang::kMa : Lang::kEn;
}

std::string Vocabulary::render(TokenId id) const {
  if (!contains(id)) throw ContractError("token id " + std::to_string(id) + " not in vocabulary");
  if (id == kSos) return "<s>";
  if (id == kEos) return "</s>";
  const auto u = static_cast<std::size_t>(id) - 2;
  return u < n_ma_ ? ma_surface(u) : en_surface(u - n_ma_);
}

std::optional<TokenId> Vocabulary::parse(const std::string& unit) const {
  for (std::size_t id = 0; id < size(); ++id) {
    if (render(static_cast<TokenId>(id)) == unit) return static_cast<TokenId>(id);
  }
  return std::nullopt;
}

std::vector<TokenTag> tag_languages(const TokenSequence& tokens, const Vocabulary& vocab) {
  std::vector<TokenTag> out;
  out.reserve(tokens.size());
  for (TokenId id : tokens) {
    auto l = vocab.lang_of(id);
    out.push_back(!l ? TokenTag::kSpecial : (*l == Lang::kMa ? TokenTag::kMa : TokenTag::kEn));
  }
  return out;
}

BilingualTranscript make_transcript(const TokenSequence& tokens, const Vocabulary& vocab) {
  BilingualTranscript t;
  t.tokens = tokens;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto l = vocab.lang_of(tokens[i]);
    if (l) {
      t.langs.push_back(*l);
    } else if (tokens[i] == Vocabulary::kEos && i + 1 == tokens.size()) {
      t.has_terminator = true;
    } else {
      throw ContractError("special token " + std::to_string(tokens[i]) + " at position " +
                          std::to_string(i) + " of a transcript");
    }
  }
  return t;
}

void validate(const BilingualTranscript& t) {
  if (t.has_terminator && t.tokens.empty()) {
    throw ContractError("transcript flagged with a terminator but empty");
  }
  const std::size_t expected = t.tokens.size() - (t.has_terminator ? 1 : 0);
  if (t.langs.size() != expected) {
    throw ContractError("transcript has " + std::to_string(t.langs.size()) + " tags for " +
                        std::to_string(expected) + " content tokens");
  }
  if (t.has_terminator && t.tokens.back() != Vocabulary::kEos) {
    throw ContractError("terminator flag set but last token is not </s>");
  }
}

std::vector<Lang> token_languages(const BilingualTranscript& t) {
  validate(t);
  std::vector<Lang> out = t.langs;
  if (t.has_terminator) out.push_back(t.langs.empty() ? Lang::kMa : t.langs.back());
  return out;
}

MonolingualTargets split_monolingual(const BilingualTranscript& t) {
  const auto langs = token_languages(t);
  MonolingualTargets out;
  for (std::size_t i = 0; i < t.tokens.size(); ++i) {
    (langs[i] == Lang::kMa ? out.ma : out.en).push_back(t.tokens[i]);
  }
  return out;
}

TokenSequence interleave(const MonolingualTargets& streams, const std::vector<Lang>& langs,
                         bool has_terminator) {
  TokenSequence out;
  std::size_t ima = 0, ien = 0;
  auto take = [&](Lang l) {
    const auto& s = l == Lang::kMa ? streams.ma : streams.en;
    auto& i = l == Lang::kMa ? ima : ien;
    if (i >= s.size()) throw ContractError("interleave: stream exhausted");
    out.push_back(s[i++]);
  };
  for (Lang l : langs) take(l);
  if (has_terminator) take(langs.empty() ? Lang::kMa : langs.back());
  if (ima != streams.ma.size() || ien != streams.en.size()) {
    throw ContractError("interleave: tokens left over");
  }
  return out;
}

QuantityTargets quantity_targets(const BilingualTranscript& t) {
  const auto s = split_monolingual(t);
  return {s.ma.size(), s.en.size(), s.ma.size() + s.en.size()};
}

LanguageChangeTargets lcd_targets(const BilingualTranscript& t, LcdConvention convention) {
  const auto langs = token_languages(t);
  const std::size_t n = langs.size();
  LanguageChangeTargets out;
  out.flags.assign(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) {
    if (langs[i] == langs[i - 1]) continue;
    out.flags[convention == LcdConvention::kFirstAfter ? i : i - 1] = 1.0;
  }
  return out;
}

std::size_t count_switch_points(const BilingualTranscript& t) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < t.langs.size(); ++i) n += t.langs[i] != t.langs[i - 1];
  return n;
}

}  // namespace cif
