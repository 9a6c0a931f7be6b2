// src/metrics.cpp

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

#include "cif/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "cif/errors.hpp"

namespace cif {

namespace {

// Decodes one code point starting at s[i]; advances i. Malformed sequences
// yield U+FFFD and consume one byte.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const int c = cont(static_cast<std::size_t>(k));
    if (c < 0) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

bool is_space(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f' ||
         cp == 0x3000 || cp == 0xA0;
}

std::vector<TaggedUnit> filter(const std::vector<TaggedUnit>& units, Lang l) {
  std::vector<TaggedUnit> out;
  for (const auto& u : units)
    if (u.lang == l) out.push_back(u);
  return out;
}

ErrorCounts align(const std::vector<TaggedUnit>& ref, const std::vector<TaggedUnit>& hyp) {
  return edit_distance<TaggedUnit>(std::span<const TaggedUnit>(ref),
                                   std::span<const TaggedUnit>(hyp));
}

nlohmann::json counts_json(const ErrorCounts& c) {
  nlohmann::json j;
  j["sub"] = c.substitutions;
  j["del"] = c.deletions;
  j["ins"] = c.insertions;
  j["ref_len"] = c.ref_len;
  auto r = c.rate();
  j["rate"] = r ? nlohmann::json(*r) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json boundary_json(const BoundaryScore& b) {
  nlohmann::json j;
  j["ref_hits"] = b.ref_hits;
  j["n_ref"] = b.n_ref;
  j["hyp_hits"] = b.hyp_hits;
  j["n_hyp"] = b.n_hyp;
  j["precision"] = b.precision();
  j["recall"] = b.recall();
  j["f1"] = b.f1();
  return j;
}

nlohmann::json rates_json(const LanguageRates& r) {
  nlohmann::json j;
  j["all"] = counts_json(r.all);
  j["ma"] = counts_json(r.ma);
  j["en"] = counts_json(r.en);
  return j;
}

std::string percent(const std::optional<double>& r) {
  if (!r) return "     -";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f", 100.0 * *r);
  return buf;
}

}  // namespace

bool is_cjk(char32_t cp) {
  return (cp >= 0x3400 && cp <= 0x4DBF) || (cp >= 0x4E00 && cp <= 0x9FFF) ||
         (cp >= 0xF900 && cp <= 0xFAFF) || (cp >= 0x20000 && cp <= 0x2A6DF) ||
         (cp >= 0x2A700 && cp <= 0x2EBEF) || (cp >= 0x2F800 && cp <= 0x2FA1F) ||
         (cp >= 0x30000 && cp <= 0x323AF);
}

std::vector<std::string> mixed_tokenize(std::string_view text) {
  std::vector<std::string> units;
  std::string run;
  auto flush = [&] {
    if (!run.empty()) units.push_back(std::move(run));
    run.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t cp = next_code_point(text, i);
    if (is_space(cp)) {
      flush();
    } else if (is_cjk(cp)) {
      flush();
      units.emplace_back(text.substr(start, i - start));
    } else {
      run.append(text.substr(start, i - start));
    }
  }
  flush();
  return units;
}

std::optional<double> ErrorCounts::rate() const {
  if (ref_len == 0) return std::nullopt;
  return static_cast<double>(errors()) / static_cast<double>(ref_len);
}

ErrorCounts& ErrorCounts::operator+=(const ErrorCounts& o) {
  substitutions += o.substitutions;
  deletions += o.deletions;
  insertions += o.insertions;
  ref_len += o.ref_len;
  return *this;
}

std::vector<TaggedUnit> tag_units(std::string_view text) {
  std::vector<TaggedUnit> out;
  for (auto& u : mixed_tokenize(text)) {
    std::size_t i = 0;
    const Lang l = is_cjk(next_code_point(u, i)) ? Lang::kMa : Lang::kEn;
    out.push_back({std::move(u), l});
  }
  return out;
}

std::vector<TaggedUnit> transcript_units(const BilingualTranscript& t, const Vocabulary& vocab) {
  validate(t);
  std::vector<TaggedUnit> out;
  for (std::size_t i = 0; i < t.langs.size(); ++i) {
    out.push_back({vocab.render(t.tokens[i]), t.langs[i]});
  }
  return out;
}

std::string render_text(const BilingualTranscript& t, const Vocabulary& vocab) {
  std::string out;
  bool prev_en = false;
  for (std::size_t i = 0; i < t.langs.size(); ++i) {
    const bool en = t.langs[i] == Lang::kEn;
    if (i > 0 && (en || prev_en)) out += ' ';
    out += vocab.render(t.tokens[i]);
    prev_en = en;
  }
  return out;
}

LanguageRates per_language_rates(const std::vector<TaggedUnit>& ref,
                                 const std::vector<TaggedUnit>& hyp) {
  LanguageRates r;
  r.all = align(ref, hyp);
  r.ma = align(filter(ref, Lang::kMa), filter(hyp, Lang::kMa));
  r.en = align(filter(ref, Lang::kEn), filter(hyp, Lang::kEn));
  return r;
}

LanguageRates per_language_rates(const BilingualTranscript& ref, const BilingualTranscript& hyp,
                                 const Vocabulary& vocab) {
  return per_language_rates(transcript_units(ref, vocab), transcript_units(hyp, vocab));
}

double BoundaryScore::precision() const {
  return n_ref == 0 ? 0.0 : static_cast<double>(ref_hits) / static_cast<double>(n_ref);
}

double BoundaryScore::recall() const {
  return n_hyp == 0 ? 0.0 : static_cast<double>(hyp_hits) / static_cast<double>(n_hyp);
}

double BoundaryScore::f1() const {
  const double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

BoundaryScore& BoundaryScore::operator+=(const BoundaryScore& o) {
  ref_hits += o.ref_hits;
  n_ref += o.n_ref;
  hyp_hits += o.hyp_hits;
  n_hyp += o.n_hyp;
  return *this;
}

BoundaryScore boundary_f1(const BoundarySet& ref, const BoundarySet& hyp, double tolerance_ms) {
  if (!(tolerance_ms >= 0.0)) throw ContractError("boundary_f1: tolerance must be >= 0");
  auto hits = [tolerance_ms](const std::vector<double>& from, std::vector<double> to) {
    std::sort(to.begin(), to.end());
    std::size_t n = 0;
    for (double x : from) {
      auto it = std::lower_bound(to.begin(), to.end(), x - tolerance_ms);
      if (it != to.end() && *it <= x + tolerance_ms) ++n;
    }
    return n;
  };
  BoundaryScore s;
  s.n_ref = ref.times_ms.size();
  s.n_hyp = hyp.times_ms.size();
  s.ref_hits = hits(ref.times_ms, hyp.times_ms);
  s.hyp_hits = hits(hyp.times_ms, ref.times_ms);
  return s;
}

std::vector<std::pair<std::string, std::string>> read_keyed_lines(
    const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected utt_id<TAB>text");
    }
    std::string id = line.substr(0, tab);
    if (!seen.insert(id).second) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": duplicate id " + id);
    }
    out.emplace_back(std::move(id), line.substr(tab + 1));
  }
  return out;
}

void write_keyed_lines(const std::filesystem::path& path,
                       const std::vector<std::pair<std::string, std::string>>& lines) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  for (const auto& [id, payload] : lines) os << id << '\t' << payload << '\n';
  if (!os) throw DataError("write failed for " + path.string());
}

BoundarySet parse_boundaries(std::string_view payload) {
  BoundarySet b;
  std::size_t i = 0;
  while (i < payload.size()) {
    while (i < payload.size() && payload[i] == ' ') ++i;
    if (i >= payload.size()) break;
    std::size_t j = i;
    while (j < payload.size() && payload[j] != ' ') ++j;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(payload.data() + i, payload.data() + j, v);
    if (ec != std::errc() || ptr != payload.data() + j || std::isnan(v)) {
      throw DataError("bad boundary value '" + std::string(payload.substr(i, j - i)) + "'");
    }
    b.times_ms.push_back(v);
    i = j;
  }
  if (!std::is_sorted(b.times_ms.begin(), b.times_ms.end())) {
    throw DataError("boundary list is not sorted");
  }
  return b;
}

std::string format_boundaries(const BoundarySet& b) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < b.times_ms.size(); ++i) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, b.times_ms[i]);
    if (i) out += ' ';
    out.append(buf, ptr);
  }
  return out;
}

ScoreReport score_corpus(const std::vector<std::pair<std::string, std::string>>& ref_text,
                         const std::vector<std::pair<std::string, std::string>>& hyp_text,
                         const std::map<std::string, BoundarySet>& ref_boundaries,
                         const std::map<std::string, BoundarySet>& hyp_boundaries,
                         double tolerance_ms) {
  std::map<std::string, const std::string*> hyps;
  for (const auto& [id, text] : hyp_text) hyps[id] = &text;
  std::set<std::string> ref_ids;
  std::vector<std::string> missing;
  for (const auto& [id, _] : ref_text) {
    ref_ids.insert(id);
    if (hyps.count(id) == 0) missing.push_back("hyp:" + id);
  }
  for (const auto& [id, _] : hyp_text)
    if (ref_ids.count(id) == 0) missing.push_back("ref:" + id);
  const bool score_boundaries = !ref_boundaries.empty() || !hyp_boundaries.empty();
  if (score_boundaries) {
    for (const auto& id : ref_ids) {
      if (ref_boundaries.count(id) == 0) missing.push_back("ref_boundaries:" + id);
      if (hyp_boundaries.count(id) == 0) missing.push_back("hyp_boundaries:" + id);
    }
  }
  if (!missing.empty()) {
    std::string msg = "utterance ids missing:";
    for (const auto& m : missing) msg += " " + m;
    throw DataError(msg);
  }

  ScoreReport report;
  report.tolerance_ms = tolerance_ms;
  if (score_boundaries) report.boundary_totals = BoundaryScore{};
  for (const auto& [id, text] : ref_text) {
    UtteranceScore u;
    u.utt_id = id;
    u.rates = per_language_rates(tag_units(text), tag_units(*hyps.at(id)));
    report.totals.all += u.rates.all;
    report.totals.ma += u.rates.ma;
    report.totals.en += u.rates.en;
    if (score_boundaries) {
      u.boundary = boundary_f1(ref_boundaries.at(id), hyp_boundaries.at(id), tolerance_ms);
      *report.boundary_totals += *u.boundary;
    }
    report.utterances.push_back(std::move(u));
  }
  return report;
}

std::string report_json(const ScoreReport& r) {
  nlohmann::json j;
  j["tolerance_ms"] = r.tolerance_ms;
  j["utterance_count"] = r.utterances.size();
  j["summary"] = rates_json(r.totals);
  j["summary"]["boundary"] =
      r.boundary_totals ? boundary_json(*r.boundary_totals) : nlohmann::json(nullptr);
  auto& utts = j["utterances"] = nlohmann::json::array();
  for (const auto& u : r.utterances) {
    nlohmann::json e = rates_json(u.rates);
    e["utt_id"] = u.utt_id;
    e["boundary"] = u.boundary ? boundary_json(*u.boundary) : nlohmann::json(nullptr);
    utts.push_back(std::move(e));
  }
  return j.dump(1) + "\n";
}

std::string report_table(const ScoreReport& r) {
  std::ostringstream os;
  const auto& t = r.totals;
  os << "utterances: " << r.utterances.size() << "\n";
  os << "          rate%    sub    del    ins    ref\n";
  auto row = [&](const char* name, const ErrorCounts& c) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-8s %s %6zu %6zu %6zu %6zu\n", name, percent(c.rate()).c_str(),
                  c.substitutions, c.deletions, c.insertions, c.ref_len);
    os << buf;
  };
  row("MER(all)", t.all);
  row("CER(ma)", t.ma);
  row("WER(en)", t.en);
  if (r.boundary_totals) {
    const auto& b = *r.boundary_totals;
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "boundary @%gms: precision %.4f  recall %.4f  F1 %.4f  (%zu/%zu ref, %zu/%zu hyp)\n",
                  r.tolerance_ms, b.precision(), b.recall(), b.f1(), b.ref_hits, b.n_ref,
                  b.hyp_hits, b.n_hyp);
    os << buf;
  }
  return os.str();
}

}  // namespace cif
