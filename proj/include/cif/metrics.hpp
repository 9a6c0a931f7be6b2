// cif/metrics.hpp

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

// Recognition and boundary scoring.
//
// Mixed error rate: each CJK ideograph is one unit, every maximal run of
// other non-space characters is one unit. On all-Mandarin text this is CER,
// on all-English text WER.
//
// CJK detection covers the Unified Ideographs block, Extensions A through H
// and both Compatibility Ideographs blocks:
//   U+3400-4DBF  U+4E00-9FFF  U+F900-FAFF  U+20000-2A6DF  U+2A700-2EBEF
//   U+2F800-2FA1F  U+30000-323AF
//
// Boundary scores count hits per side independently (no one-to-one
// matching): a reference boundary is hit when some hypothesis boundary lies
// within +-tolerance of it (endpoints inclusive) and vice versa. Precision is
// hit references over references, recall hit hypotheses over hypotheses.

#ifndef CIF_METRICS_HPP_
#define CIF_METRICS_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cif/labels.hpp"
#include "cif/types.hpp"

namespace cif {

bool is_cjk(char32_t cp);

// Splits UTF-8 text into scoring units. Invalid bytes are kept as part of
// the surrounding non-CJK run.
std::vector<std::string> mixed_tokenize(std::string_view text);

struct ErrorCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_len = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  // (S + D + I) / ref_len; absent when the reference is empty.
  std::optional<double> rate() const;
  ErrorCounts& operator+=(const ErrorCounts& o);
  bool operator==(const ErrorCounts&) const = default;
};

// Levenshtein alignment cost table plus a backtrace preferring substitution
// (or match) over insertion over deletion.
template <typename T>
ErrorCounts edit_distance(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({sub, at(i, j - 1) + 1, at(i - 1, j) + 1});
    }
  }
  ErrorCounts c;
  c.ref_len = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 &&
        at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (!(ref[i - 1] == hyp[j - 1])) ++c.substitutions;
      --i;
      --j;
    } else if (j > 0 && at(i, j) == at(i, j - 1) + 1) {
      ++c.insertions;
      --j;
    } else {
      ++c.deletions;
      --i;
    }
  }
  return c;
}

inline ErrorCounts edit_distance(const std::vector<std::string>& ref,
                                 const std::vector<std::string>& hyp) {
  return edit_distance<std::string>(std::span<const std::string>(ref),
                                    std::span<const std::string>(hyp));
}

// A scoring unit with its language.
struct TaggedUnit {
  std::string text;
  Lang lang = Lang::kMa;
  bool operator==(const TaggedUnit& o) const { return text == o.text; }
};

// Units of `text`, CJK units tagged Mandarin and the rest English.
std::vector<TaggedUnit> tag_units(std::string_view text);
// Content tokens of a transcript (terminator dropped) as tagged units.
std::vector<TaggedUnit> transcript_units(const BilingualTranscript& t, const Vocabulary& vocab);
// Surface text: Mandarin units run together, a space around English units.
std::string render_text(const BilingualTranscript& t, const Vocabulary& vocab);

struct LanguageRates {
  ErrorCounts ma, en, all;
};

// `all` aligns the full mixtures; `ma` and `en` align the language-filtered
// streams independently.
LanguageRates per_language_rates(const std::vector<TaggedUnit>& ref,
                                 const std::vector<TaggedUnit>& hyp);
LanguageRates per_language_rates(const BilingualTranscript& ref, const BilingualTranscript& hyp,
                                 const Vocabulary& vocab);

struct BoundaryScore {
  std::size_t ref_hits = 0;
  std::size_t n_ref = 0;
  std::size_t hyp_hits = 0;
  std::size_t n_hyp = 0;

  // Zero denominators give 0.
  double precision() const;
  double recall() const;
  double f1() const;
  BoundaryScore& operator+=(const BoundaryScore& o);
};

inline constexpr double kDefaultToleranceMs = 50.0;

BoundaryScore boundary_f1(const BoundarySet& ref, const BoundarySet& hyp,
                          double tolerance_ms = kDefaultToleranceMs);

// ---- corpus scoring ---------------------------------------------------------

// `utt_id<TAB>payload` lines, in file order. Throws DataError on lines
// without a tab and on duplicate ids.
std::vector<std::pair<std::string, std::string>> read_keyed_lines(
    const std::filesystem::path& path);
void write_keyed_lines(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, std::string>>& lines);

// Space-separated millisecond values.
BoundarySet parse_boundaries(std::string_view payload);
std::string format_boundaries(const BoundarySet& b);

struct UtteranceScore {
  std::string utt_id;
  LanguageRates rates;
  std::optional<BoundaryScore> boundary;
};

struct ScoreReport {
  std::vector<UtteranceScore> utterances;
  LanguageRates totals;
  std::optional<BoundaryScore> boundary_totals;
  double tolerance_ms = kDefaultToleranceMs;
};

// Scores every reference utterance against the hypothesis with the same id.
// Throws DataError listing ids missing on either side. Boundary maps may be
// empty to skip boundary scoring.
ScoreReport score_corpus(const std::vector<std::pair<std::string, std::string>>& ref_text,
                         const std::vector<std::pair<std::string, std::string>>& hyp_text,
                         const std::map<std::string, BoundarySet>& ref_boundaries,
                         const std::map<std::string, BoundarySet>& hyp_boundaries,
                         double tolerance_ms);

// Machine-readable form (JSON).
std::string report_json(const ScoreReport& r);
// Human-readable summary table.
std::string report_table(const ScoreReport& r);

}  // namespace cif

#endif  // CIF_METRICS_HPP_
