// tests/oracles.cpp

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

#include "oracles.hpp"

#include <cmath>
#include <deque>

namespace cif::testing {

double ctc_brute_force(const Tensor& logits, const std::vector<TokenId>& targets, TokenId blank) {
  const std::size_t frames = logits.rows(), classes = logits.cols();
  std::vector<double> prob(frames * classes);
  for (std::size_t t = 0; t < frames; ++t) {
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(logits.at(t, c));
    for (std::size_t c = 0; c < classes; ++c) prob[t * classes + c] = std::exp(logits.at(t, c)) / z;
  }
  std::vector<std::size_t> path(frames, 0);
  double total = 0.0;
  while (true) {
    std::vector<TokenId> collapsed;
    TokenId prev = -1;
    double p = 1.0;
    for (std::size_t t = 0; t < frames; ++t) {
      const auto c = static_cast<TokenId>(path[t]);
      p *= prob[t * classes + path[t]];
      if (c != blank && c != prev) collapsed.push_back(c);
      prev = c;
    }
    if (collapsed == targets) total += p;
    std::size_t t = 0;
    while (t < frames && ++path[t] == classes) path[t++] = 0;
    if (t == frames) break;
  }
  return -std::log(total);
}

EditGraph::EditGraph(int alphabet, std::size_t max_len) : alphabet_(alphabet), max_len_(max_len) {
  std::vector<std::vector<int>> layer{{}};
  for (std::size_t len = 0; len <= max_len; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& s : layer) {
      index_[s] = strings_.size();
      strings_.push_back(s);
      for (int a = 0; a < alphabet; ++a) {
        auto t = s;
        t.push_back(a);
        next.push_back(t);
      }
    }
    layer = std::move(next);
  }
}

std::vector<int> EditGraph::distances_from(std::size_t src) const {
  std::vector<int> dist(strings_.size(), -1);
  std::deque<std::size_t> queue{src};
  dist[src] = 0;
  auto visit = [&](const std::vector<int>& s, int d) {
    auto it = index_.find(s);
    if (it == index_.end() || dist[it->second] >= 0) return;
    dist[it->second] = d;
    queue.push_back(it->second);
  };
  while (!queue.empty()) {
    const std::size_t u = queue.front();
    queue.pop_front();
    const auto& s = strings_[u];
    const int d = dist[u] + 1;
    for (std::size_t i = 0; i < s.size(); ++i) {
      auto del = s;
      del.erase(del.begin() + static_cast<std::ptrdiff_t>(i));
      visit(del, d);
      for (int a = 0; a < alphabet_; ++a) {
        if (a == s[i]) continue;
        auto sub = s;
        sub[i] = a;
        visit(sub, d);
      }
    }
    if (s.size() < max_len_) {
      for (std::size_t i = 0; i <= s.size(); ++i) {
        for (int a = 0; a < alphabet_; ++a) {
          auto ins = s;
          ins.insert(ins.begin() + static_cast<std::ptrdiff_t>(i), a);
          visit(ins, d);
        }
      }
    }
  }
  return dist;
}

}  // namespace cif::testing
