// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// Definition-level reference computations used only by tests. Nothing here
// calls into the library; each oracle is written from the textbook definition.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <string>
#include <vector>

namespace oracle {

// Full-matrix Levenshtein over word ids.
inline int levenshtein(const std::vector<int>& r, const std::vector<int>& h) {
  std::vector<std::vector<int>> d(r.size() + 1, std::vector<int>(h.size() + 1, 0));
  for (size_t i = 0; i <= r.size(); ++i) d[i][0] = static_cast<int>(i);
  for (size_t j = 0; j <= h.size(); ++j) d[0][j] = static_cast<int>(j);
  for (size_t i = 1; i <= r.size(); ++i)
    for (size_t j = 1; j <= h.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (r[i - 1] == h[j - 1] ? 0 : 1)});
  return d[r.size()][h.size()];
}

// Every ordering reachable from `h` by block moves, with the minimum number of
// moves needed to reach it. A block move cuts h[s, s+len) and reinserts it at
// any other position.
inline std::map<std::vector<int>, int> shift_distances(const std::vector<int>& h) {
  std::map<std::vector<int>, int> dist{{h, 0}};
  std::queue<std::vector<int>> q;
  q.push(h);
  while (!q.empty()) {
    const auto x = q.front();
    q.pop();
    const int dx = dist[x];
    const int n = static_cast<int>(x.size());
    for (int s = 0; s < n; ++s) {
      for (int len = 1; s + len <= n; ++len) {
        std::vector<int> block(x.begin() + s, x.begin() + s + len);
        std::vector<int> rest;
        for (int i = 0; i < n; ++i)
          if (i < s || i >= s + len) rest.push_back(x[i]);
        for (int pos = 0; pos <= static_cast<int>(rest.size()); ++pos) {
          std::vector<int> y = rest;
          y.insert(y.begin() + pos, block.begin(), block.end());
          if (!dist.count(y)) {
            dist[y] = dx + 1;
            q.push(y);
          }
        }
      }
    }
  }
  return dist;
}

// Exhaustive minimum of (#shifts + edit distance) over every shift sequence.
inline int ter_edits(const std::vector<int>& r, const std::map<std::vector<int>, int>& reachable) {
  int best = 1 << 30;
  for (const auto& [x, d] : reachable) best = std::min(best, d + levenshtein(r, x));
  return best;
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  double num = 0, da = 0, db = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  return num / std::sqrt(da * db);
}

// Rank = 1 + #smaller + (#equal - 1) / 2.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<double> out;
  for (double x : v) {
    double smaller = 0, equal = 0;
    for (double y : v) {
      if (y < x) smaller += 1;
      if (y == x) equal += 1;
    }
    out.push_back(1 + smaller + (equal - 1) / 2);
  }
  return out;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(ranks(a), ranks(b));
}

// tau-b straight from pair counts.
inline double kendall_tau_b(const std::vector<double>& a, const std::vector<double>& b) {
  double c = 0, d = 0, ta = 0, tb = 0;
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = i + 1; j < a.size(); ++j) {
      const double s = (a[i] - a[j]) * (b[i] - b[j]);
      if (s > 0) c += 1;
      if (s < 0) d += 1;
      if (a[i] == a[j]) ta += 1;
      if (b[i] == b[j]) tb += 1;
    }
  const double n0 = static_cast<double>(a.size() * (a.size() - 1) / 2);
  return (c - d) / std::sqrt((n0 - ta) * (n0 - tb));
}

// Step-by-step simulation of entropy-gated blending over a bigram table
// fixture, kept as plain maps so it shares no code with the decoder.
using Dist = std::map<std::string, double>;

inline double entropy(const Dist& p) {
  double h = 0;
  for (const auto& kv : p)
    if (kv.second > 0) h -= kv.second * std::log(kv.second);
  return h;
}

struct BigramTables {
  std::map<std::string, Dist> base;
  std::map<std::string, Dist> context;
  std::string end;
  const Dist& row(bool ctx, const std::string& prev) const {
    if (ctx && context.count(prev)) return context.at(prev);
    return base.at(prev);
  }
};

// Returns the emitted tokens (end excluded) and appends each step's branch
// ("blend"/"suppress") to `branches`.
inline std::vector<std::string> ckplug_decode(const BigramTables& t, double alpha, int max_steps,
                                              std::vector<std::string>* branches = nullptr) {
  std::vector<std::string> out;
  std::string prev = "<s>";
  for (int step = 0; step < max_steps; ++step) {
    const Dist& c = t.row(true, prev);
    const Dist& i = t.row(false, prev);
    const double cg = entropy(i) - entropy(c);
    Dist mixed;
    if (cg > 0) {
      for (const auto& kv : c) mixed[kv.first] += alpha * kv.second;
      for (const auto& kv : i) mixed[kv.first] += (1 - alpha) * kv.second;
    } else {
      mixed = i;
    }
    if (branches) branches->push_back(cg > 0 ? "blend" : "suppress");
    std::string best;
    double best_p = -1;
    for (const auto& kv : mixed)
      if (kv.second > best_p) {
        best = kv.first;
        best_p = kv.second;
      }
    if (best == t.end) break;
    out.push_back(best);
    prev = best;
  }
  return out;
}

}  // namespace oracle
