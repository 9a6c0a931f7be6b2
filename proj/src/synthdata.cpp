// src/synthdata.cpp

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

#include "cif/synthdata.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "cif/errors.hpp"
#include "cif/random.hpp"

namespace cif {

namespace {

constexpr const char* kManifestName = "manifest.tsv";
constexpr const char* kManifestTag = "#cif-manifest";

std::string fmt(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  for (auto w : split(s, ' '))
    if (!w.empty()) out.push_back(w);
  return out;
}

template <typename T>
bool parse_num(std::string_view s, T& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

struct LineError {
  std::string where;
  [[noreturn]] void operator()(const std::string& msg) const {
    throw DataError(where + ": " + msg);
  }
};

std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

void write_text_features(const std::filesystem::path& path, const Tensor& f) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  const std::size_t rows = f.rows(), cols = f.cols();
  auto d = f.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) os << (c ? " " : "") << fmt(d[r * cols + c]);
    os << '\n';
  }
  if (!os) throw DataError("write failed for " + path.string());
}

void write_binary_features(const std::filesystem::path& path, const Tensor& f) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  auto put_u64 = [&](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
  };
  put_u64(f.rows());
  put_u64(f.cols());
  for (double v : f.data()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(bits);
  }
  if (!os) throw DataError("write failed for " + path.string());
}

Tensor read_text_features(const std::filesystem::path& path, std::size_t feat_dim) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::vector<double> values;
  std::string line;
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    const LineError err{path.string() + ":" + std::to_string(rows)};
    auto ws = words(line);
    if (ws.size() != feat_dim) {
      err("expected " + std::to_string(feat_dim) + " values, found " + std::to_string(ws.size()));
    }
    for (auto w : ws) {
      double v;
      if (!parse_num(w, v) || !std::isfinite(v)) err("bad value '" + std::string(w) + "'");
      values.push_back(v);
    }
  }
  if (rows == 0) throw DataError(path.string() + ": no frames");
  return Tensor::matrix(rows, feat_dim, std::move(values));
}

Tensor read_binary_features(const std::filesystem::path& path, std::size_t feat_dim) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  auto get_u64 = [&]() {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError(path.string() + ": truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  };
  const std::uint64_t rows = get_u64(), cols = get_u64();
  if (cols != feat_dim || rows == 0 || rows > (1ull << 32)) {
    throw DataError(path.string() + ": bad dimensions");
  }
  std::vector<double> values(rows * cols);
  for (auto& v : values) {
    const std::uint64_t bits = get_u64();
    std::memcpy(&v, &bits, 8);
    if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite value");
  }
  return Tensor::matrix(rows, cols, std::move(values));
}

}  // namespace

void validate(const SynthSpec& s) {
  auto fail = [](const std::string& m) { throw ConfigError("data config: " + m); };
  if (s.n_ma + s.n_en == 0) fail("vocabulary has no units");
  if (s.feat_dim == 0) fail("feat_dim must be positive");
  auto range = [&](std::size_t lo, std::size_t hi, const char* what) {
    if (lo < 1 || hi < lo) fail(std::string(what) + " range must satisfy 1 <= min <= max");
  };
  range(s.ma_min_frames, s.ma_max_frames, "ma duration");
  range(s.en_min_frames, s.en_max_frames, "en duration");
  range(s.silence_min_frames, s.silence_max_frames, "silence duration");
  range(s.min_tokens, s.max_tokens, "token count");
  if (!(s.sigma >= 0.0)) fail("sigma must be >= 0");
  if (!(s.switch_prob >= 0.0 && s.switch_prob <= 1.0)) fail("switch_prob must be in [0, 1]");
  if (!(s.en_similarity >= 0.0 && s.en_similarity < 1.0)) fail("en_similarity must be in [0, 1)");
  if (!(s.frame_shift_ms > 0.0)) fail("frame_shift_ms must be positive");
  if (!s.allow_repeats && s.switch_prob < 1.0 && (s.n_ma == 1 || s.n_en == 1)) {
    fail("a language with a single unit needs allow_repeats");
  }
  if (s.n_ma == 0 && s.switch_prob > 0.0) fail("switching needs units in both languages");
  if (s.n_en == 0 && s.switch_prob > 0.0) fail("switching needs units in both languages");
}

bool SynthUtterance::operator==(const SynthUtterance& o) const {
  if (id != o.id || !(transcript == o.transcript) || !(gold == o.gold)) return false;
  if (features.defined() != o.features.defined()) return false;
  if (!features.defined()) return true;
  if (features.shape() != o.features.shape()) return false;
  auto a = features.data(), b = o.features.data();
  return std::equal(a.begin(), a.end(), b.begin());
}

bool Corpus::operator==(const Corpus& o) const {
  return vocab == o.vocab && feat_dim == o.feat_dim && utterances == o.utterances;
}

std::vector<std::vector<double>> prototypes(const SynthSpec& spec) {
  validate(spec);
  const Vocabulary vocab(spec.n_ma, spec.n_en);
  std::mt19937_64 rng(derive_seed(spec.seed, 0));
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&] {
    std::vector<double> v(spec.feat_dim);
    for (auto& x : v) x = normal(rng);
    return v;
  };
  std::vector<std::vector<double>> table(vocab.size(), std::vector<double>(spec.feat_dim, 0.0));
  for (std::size_t i = 0; i < spec.n_ma; ++i) table[vocab.ma_id(i)] = draw();
  const std::vector<double> center = draw();
  const double a = std::sqrt(spec.en_similarity), b = std::sqrt(1.0 - spec.en_similarity);
  for (std::size_t i = 0; i < spec.n_en; ++i) {
    auto v = draw();
    for (std::size_t d = 0; d < spec.feat_dim; ++d) v[d] = a * center[d] + b * v[d];
    table[vocab.en_id(i)] = std::move(v);
  }
  // Silence is a low-energy frame.
  auto sil = draw();
  for (auto& x : sil) x *= 0.1;
  table[Vocabulary::kEos] = std::move(sil);
  return table;
}

Corpus generate(const SynthSpec& spec, std::size_t n, std::size_t offset) {
  validate(spec);
  const Vocabulary vocab(spec.n_ma, spec.n_en);
  const auto protos = prototypes(spec);
  const std::uint64_t utt_base = derive_seed(spec.seed, 1);

  Corpus c;
  c.vocab = vocab;
  c.feat_dim = spec.feat_dim;
  c.utterances.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t index = offset + k;
    std::mt19937_64 rng(derive_seed(utt_base, index));
    std::normal_distribution<double> noise(0.0, 1.0);
    std::bernoulli_distribution coin(0.5), do_switch(spec.switch_prob);

    SynthUtterance u;
    char id[32];
    std::snprintf(id, sizeof id, "utt%07zu", index);
    u.id = id;

    const std::size_t count = uniform_int(rng, spec.min_tokens, spec.max_tokens);
    Lang lang = spec.n_en == 0 ? Lang::kMa : spec.n_ma == 0 ? Lang::kEn
                                                              : (coin(rng) ? Lang::kEn : Lang::kMa);
    TokenSequence tokens;
    std::vector<std::size_t> durations;
    for (std::size_t i = 0; i < count; ++i) {
      if (i > 0 && do_switch(rng)) lang = lang == Lang::kMa ? Lang::kEn : Lang::kMa;
      const std::size_t units = lang == Lang::kMa ? spec.n_ma : spec.n_en;
      TokenId id_tok;
      do {
        const std::size_t unit = uniform_int(rng, 0, units - 1);
        id_tok = lang == Lang::kMa ? vocab.ma_id(unit) : vocab.en_id(unit);
      } while (!spec.allow_repeats && !tokens.empty() && id_tok == tokens.back());
      tokens.push_back(id_tok);
      u.transcript.langs.push_back(lang);
      durations.push_back(lang == Lang::kMa
                              ? uniform_int(rng, spec.ma_min_frames, spec.ma_max_frames)
                              : uniform_int(rng, spec.en_min_frames, spec.en_max_frames));
    }
    tokens.push_back(Vocabulary::kEos);
    durations.push_back(uniform_int(rng, spec.silence_min_frames, spec.silence_max_frames));
    u.transcript.tokens = tokens;
    u.transcript.has_terminator = true;

    std::size_t frames = 0;
    for (auto d : durations) frames += d;
    std::vector<double> values;
    values.reserve(frames * spec.feat_dim);
    std::size_t end = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const auto& proto = protos[static_cast<std::size_t>(tokens[i])];
      for (std::size_t f = 0; f < durations[i]; ++f) {
        for (std::size_t d = 0; d < spec.feat_dim; ++d) {
          values.push_back(proto[d] + spec.sigma * noise(rng));
        }
      }
      end += durations[i];
      if (i + 1 < tokens.size()) {
        u.gold.times_ms.push_back(static_cast<double>(end - 1) * spec.frame_shift_ms);
      }
    }
    u.features = Tensor::matrix(frames, spec.feat_dim, std::move(values));
    c.utterances.push_back(std::move(u));
  }
  return c;
}

CorpusStats corpus_stats(const Corpus& c) {
  CorpusStats s;
  s.utterances = c.utterances.size();
  for (const auto& u : c.utterances) {
    for (Lang l : u.transcript.langs) (l == Lang::kMa ? s.ma_tokens : s.en_tokens)++;
    s.switch_points += count_switch_points(u.transcript);
    s.frames += u.features.rows();
  }
  return s;
}

void write_manifest(const Corpus& c, const std::filesystem::path& dir, bool binary) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "feats", ec);
  if (ec) throw DataError("cannot create " + (dir / "feats").string() + ": " + ec.message());
  std::ofstream os(dir / kManifestName, std::ios::trunc);
  if (!os) throw DataError("cannot write " + (dir / kManifestName).string());
  os << kManifestTag << " v1 n_ma=" << c.vocab.n_ma() << " n_en=" << c.vocab.n_en()
     << " feat_dim=" << c.feat_dim << '\n';
  for (const auto& u : c.utterances) {
    validate(u.transcript);
    const std::string rel = "feats/" + u.id + (binary ? ".bin" : ".txt");
    if (binary) {
      write_binary_features(dir / rel, u.features);
    } else {
      write_text_features(dir / rel, u.features);
    }
    os << u.id << '\t' << rel << '\t';
    for (std::size_t i = 0; i < u.transcript.tokens.size(); ++i) {
      os << (i ? " " : "") << u.transcript.tokens[i];
    }
    os << '\t';
    for (std::size_t i = 0; i < u.transcript.langs.size(); ++i) {
      os << (i ? " " : "") << lang_name(u.transcript.langs[i]);
    }
    os << '\t';
    for (std::size_t i = 0; i < u.gold.times_ms.size(); ++i) {
      os << (i ? " " : "") << fmt(u.gold.times_ms[i]);
    }
    os << '\n';
  }
  if (!os) throw DataError("write failed for " + (dir / kManifestName).string());
}

Corpus read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / kManifestName;
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw DataError(path.string() + ":1: empty manifest");

  Corpus c;
  {
    const LineError err{path.string() + ":1"};
    auto ws = words(line);
    if (ws.size() != 5 || ws[0] != kManifestTag || ws[1] != "v1") err("bad manifest header");
    std::size_t vals[3];
    const char* keys[3] = {"n_ma=", "n_en=", "feat_dim="};
    for (int i = 0; i < 3; ++i) {
      auto w = ws[static_cast<std::size_t>(i) + 2];
      const std::string_view key = keys[i];
      if (w.substr(0, key.size()) != key || !parse_num(w.substr(key.size()), vals[i])) {
        err("bad header field '" + std::string(w) + "'");
      }
    }
    c.vocab = Vocabulary(vals[0], vals[1]);
    c.feat_dim = vals[2];
    if (c.feat_dim == 0) err("feat_dim must be positive");
  }

  std::set<std::string> ids;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    const LineError err{path.string() + ":" + std::to_string(lineno)};
    if (line.empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 5) {
      err("expected 5 tab-separated fields, found " + std::to_string(fields.size()));
    }
    SynthUtterance u;
    u.id = std::string(fields[0]);
    if (u.id.empty() || u.id.find(' ') != std::string::npos) err("bad utterance id");
    if (!ids.insert(u.id).second) err("duplicate utterance id " + u.id);

    TokenSequence tokens;
    for (auto w : words(fields[2])) {
      TokenId t;
      if (!parse_num(w, t) || !c.vocab.contains(t)) err("bad token id '" + std::string(w) + "'");
      tokens.push_back(t);
    }
    try {
      u.transcript = make_transcript(tokens, c.vocab);
    } catch (const ContractError& e) {
      err(e.what());
    }
    auto lang_words = words(fields[3]);
    if (lang_words.size() != u.transcript.langs.size()) {
      err("language tag count differs from content token count");
    }
    for (std::size_t i = 0; i < lang_words.size(); ++i) {
      if (lang_words[i] != lang_name(u.transcript.langs[i])) {
        err("language tag '" + std::string(lang_words[i]) + "' contradicts token " +
            std::to_string(u.transcript.tokens[i]));
      }
    }
    for (auto w : words(fields[4])) {
      double v;
      if (!parse_num(w, v) || !std::isfinite(v)) err("bad boundary '" + std::string(w) + "'");
      u.gold.times_ms.push_back(v);
    }
    if (!std::is_sorted(u.gold.times_ms.begin(), u.gold.times_ms.end())) {
      err("boundaries not sorted");
    }
    const std::filesystem::path feat = dir / std::string(fields[1]);
    u.features = feat.extension() == ".bin" ? read_binary_features(feat, c.feat_dim)
                                            : read_text_features(feat, c.feat_dim);
    c.utterances.push_back(std::move(u));
  }
  return c;
}

}  // namespace cif
