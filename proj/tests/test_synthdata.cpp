// tests/test_synthdata.cpp

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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cif/errors.hpp"
#include "cif/synthdata.hpp"
#include "doctest.h"

using namespace cif;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("cif_synth_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("generation is deterministic and sliceable") {
  SynthSpec s;
  s.sigma = 0;
  CHECK(generate(s, 2) == generate(s, 2));
  const auto all = generate(s, 6);
  const auto tail = generate(s, 3, 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(tail.utterances[i] == all.utterances[3 + i]);
  s.seed = 8;
  CHECK_FALSE(generate(s, 2) == all);
}

TEST_CASE("switch probability zero gives monolingual utterances") {
  SynthSpec s;
  s.switch_prob = 0;
  for (const auto& u : generate(s, 50).utterances) {
    for (Lang l : u.transcript.langs) CHECK(l == u.transcript.langs.front());
  }
}

TEST_CASE("generator self-audit") {
  SynthSpec s;
  const auto c = generate(s, 1000);
  for (const auto& u : c.utterances) {
    const auto& t = u.transcript;
    CHECK(t.has_terminator);
    CHECK(t.langs.size() >= s.min_tokens);
    CHECK(t.langs.size() <= s.max_tokens);
    CHECK(u.gold.times_ms.size() == t.langs.size());
    for (std::size_t i = 0; i < t.langs.size(); ++i) CHECK(c.vocab.lang_of(t.tokens[i]) == t.langs[i]);
    for (std::size_t i = 1; i < t.langs.size(); ++i) CHECK(t.tokens[i] != t.tokens[i - 1]);
    CHECK(std::is_sorted(u.gold.times_ms.begin(), u.gold.times_ms.end()));
    CHECK(u.gold.times_ms.back() < static_cast<double>(u.features.rows()) * s.frame_shift_ms);
  }
}

TEST_CASE("noise-free features are recovered by the nearest prototype") {
  SynthSpec s;
  s.sigma = 0;
  const auto protos = prototypes(s);
  const auto c = generate(s, 30);
  for (const auto& u : c.utterances) {
    TokenSequence decoded;
    for (std::size_t t = 0; t < u.features.rows(); ++t) {
      std::size_t best = 1;
      double bd = INFINITY;
      for (std::size_t k = 1; k < protos.size(); ++k) {
        double d = 0;
        for (std::size_t j = 0; j < s.feat_dim; ++j) d += std::pow(u.features.at(t, j) - protos[k][j], 2);
        if (d < bd) {
          bd = d;
          best = k;
        }
      }
      if (decoded.empty() || decoded.back() != static_cast<TokenId>(best)) decoded.push_back(static_cast<TokenId>(best));
    }
    CHECK(decoded == u.transcript.tokens);
  }
}

TEST_CASE("mandarin tokens last longer than english tokens") {
  SynthSpec s;
  const auto c = generate(s, 200);
  double ma = 0, en = 0;
  std::size_t nma = 0, nen = 0;
  for (const auto& u : c.utterances) {
    double prev = -s.frame_shift_ms;
    for (std::size_t i = 0; i < u.gold.times_ms.size(); ++i) {
      const double d = u.gold.times_ms[i] - prev;
      prev = u.gold.times_ms[i];
      (u.transcript.langs[i] == Lang::kMa ? ma : en) += d;
      ++(u.transcript.langs[i] == Lang::kMa ? nma : nen);
    }
  }
  CHECK(ma / nma > en / nen);
}

TEST_CASE("spec validation") {
  SynthSpec s;
  s.min_tokens = 5;
  s.max_tokens = 4;
  CHECK_THROWS_AS(validate(s), ConfigError);
  s = {};
  s.en_similarity = 1.0;
  CHECK_THROWS_AS(validate(s), ConfigError);
}

TEST_CASE("manifest round trip, text and binary") {
  SynthSpec s;
  const auto c = generate(s, 10);
  for (bool binary : {false, true}) {
    const fs::path d = temp_dir(binary ? "bin" : "txt");
    write_manifest(c, d, binary);
    CHECK(read_manifest(d) == c);
    std::ifstream in(d / "manifest.tsv");
    std::string line;
    std::size_t records = 0;
    while (std::getline(in, line))
      if (!line.empty() && line[0] != '#') ++records;
    CHECK(records == 10);
  }
}

TEST_CASE("same seed gives byte-identical manifests") {
  SynthSpec s;
  const fs::path a = temp_dir("a"), b = temp_dir("b");
  write_manifest(generate(s, 5), a);
  write_manifest(generate(s, 5), b);
  CHECK(slurp(a / "manifest.tsv") == slurp(b / "manifest.tsv"));
  CHECK(slurp(a / "feats" / "utt0000000.txt") == slurp(b / "feats" / "utt0000000.txt"));
}

TEST_CASE("malformed manifests name the offending line") {
  SynthSpec s;
  const fs::path d = temp_dir("bad");
  write_manifest(generate(s, 3), d);
  std::string text = slurp(d / "manifest.tsv");
  text.resize(text.rfind('\t'));  // truncate the last record
  std::ofstream(d / "manifest.tsv", std::ios::binary) << text;
  try {
    read_manifest(d);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("manifest.tsv:4") != std::string::npos);
  }
  CHECK_THROWS_AS(read_manifest(temp_dir("missing")), DataError);
}

TEST_CASE("corpus statistics") {
  SynthSpec s;
  const auto c = generate(s, 50);
  const auto st = corpus_stats(c);
  std::size_t ma = 0, en = 0, sw = 0;
  for (const auto& u : c.utterances) {
    for (std::size_t i = 0; i < u.transcript.langs.size(); ++i) {
      (u.transcript.langs[i] == Lang::kMa ? ma : en)++;
      if (i > 0 && u.transcript.langs[i] != u.transcript.langs[i - 1]) ++sw;
    }
  }
  CHECK(st.utterances == 50);
  CHECK(st.ma_tokens == ma);
  CHECK(st.en_tokens == en);
  CHECK(st.switch_points == sw);
}
