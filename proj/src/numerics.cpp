// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxnoise/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "ctxnoise/error.hpp"
#include "ctxnoise/text.hpp"

namespace ctxnoise::numerics {

namespace {

void validate_probs(std::span<const double> p, double tolerance) {
  if (p.empty()) fail(ErrorKind::kValidation, "probability vector is empty");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::kValidation, "probability vector has a negative or non-finite entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > tolerance) {
    fail(ErrorKind::kValidation, "probability vector sums to " + std::to_string(sum) + ", not 1");
  }
}

struct SeqHash {
  size_t operator()(const std::vector<int>& v) const noexcept {
    size_t h = 1469598103934665603ull;
    for (int x : v) h = (h ^ static_cast<size_t>(x)) * 1099511628211ull;
    return h;
  }
};

// Moves hypothesis[start, start+len) so that it begins at index `to` of the result.
std::vector<int> apply_shift(std::span<const int> h, size_t start, size_t len, size_t to) {
  std::vector<int> out;
  out.reserve(h.size());
  std::vector<int> rest;
  rest.reserve(h.size() - len);
  for (size_t i = 0; i < h.size(); ++i) {
    if (i < start || i >= start + len) rest.push_back(h[i]);
  }
  out.insert(out.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(to));
  out.insert(out.end(), h.begin() + static_cast<std::ptrdiff_t>(start), h.begin() + static_cast<std::ptrdiff_t>(start + len));
  out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(to), rest.end());
  return out;
}

bool occurs_in(std::span<const int> haystack, std::span<const int> needle) {
  if (needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) != haystack.end();
}

// Shifts never change the word multiset, so the multiset difference bounds the
// edit distance of every reachable ordering from below.
size_t bag_lower_bound(std::span<const int> r, std::span<const int> h) {
  std::unordered_map<int, long> count;
  for (int w : r) ++count[w];
  for (int w : h) --count[w];
  size_t missing = 0, extra = 0;
  for (const auto& [w, c] : count) {
    if (c > 0) missing += static_cast<size_t>(c);
    if (c < 0) extra += static_cast<size_t>(-c);
  }
  return std::max(missing, extra);
}

}  // namespace

ProbVector::ProbVector(std::vector<double> probs, double tolerance) : probs_(std::move(probs)) {
  validate_probs(probs_, tolerance);
}

double shannon_entropy(const ProbVector& p) {
  double h = 0.0;
  for (double v : p.values()) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return std::max(h, 0.0);
}

double shannon_entropy(std::span<const double> p, double tolerance) {
  validate_probs(p, tolerance);
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return std::max(h, 0.0);
}

size_t edit_distance(std::span<const int> r, std::span<const int> h) {
  std::vector<size_t> prev(h.size() + 1), cur(h.size() + 1);
  std::iota(prev.begin(), prev.end(), size_t{0});
  for (size_t i = 1; i <= r.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= h.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r[i - 1] == h[j - 1] ? 0u : 1u)});
    }
    std::swap(prev, cur);
  }
  return prev[h.size()];
}

size_t greedy_shift_edits(std::span<const int> r, std::span<const int> hyp, size_t* shifts_out) {
  std::vector<int> h(hyp.begin(), hyp.end());
  size_t cost = edit_distance(r, h);
  size_t shifts = 0;
  while (true) {
    size_t best = cost;
    std::vector<int> best_h;
    for (size_t s = 0; s < h.size(); ++s) {
      for (size_t len = 1; s + len <= h.size(); ++len) {
        if (!occurs_in(r, std::span<const int>(h).subspan(s, len))) break;
        for (size_t to = 0; to + len <= h.size(); ++to) {
          if (to == s) continue;
          auto candidate = apply_shift(h, s, len, to);
          const size_t e = edit_distance(r, candidate) + 1;
          if (e < best) {
            best = e;
            best_h = std::move(candidate);
          }
        }
      }
    }
    if (best >= cost) break;
    h = std::move(best_h);
    ++shifts;
    cost = edit_distance(r, h);
  }
  if (shifts_out) *shifts_out = shifts;
  return shifts + cost;
}

TerResult ter_detail(std::span<const std::string> reference, std::span<const std::string> hypothesis,
                     const TerOptions& options) {
  if (reference.empty()) fail(ErrorKind::kValidation, "TER reference is empty");

  std::unordered_map<std::string, int> vocab;
  auto intern = [&](std::span<const std::string> words) {
    std::vector<int> ids;
    ids.reserve(words.size());
    for (const auto& w : words) ids.push_back(vocab.emplace(w, static_cast<int>(vocab.size())).first->second);
    return ids;
  };
  const std::vector<int> r = intern(reference);
  const std::vector<int> h = intern(hypothesis);

  TerResult result;
  result.reference_length = r.size();
  const size_t plain = edit_distance(r, h);

  if (options.mode == TerMode::kEditDistance) {
    result.edit_distance = plain;
    result.edits = plain;
  } else {
    // Exact minimum of (shifts + edit distance) over all block-shift
    // sequences, by breadth-first search over hypothesis orderings. Greedy
    // supplies the starting upper bound; the bag bound prunes depth.
    size_t greedy_shifts = 0;
    const size_t greedy = greedy_shift_edits(r, h, &greedy_shifts);
    size_t best = plain;
    size_t best_shifts = 0;
    if (greedy < best) {
      best = greedy;
      best_shifts = greedy_shifts;
    }
    const size_t floor = bag_lower_bound(r, h);

    std::unordered_set<std::vector<int>, SeqHash> seen;
    std::vector<std::vector<int>> frontier{h};
    seen.insert(h);
    size_t depth = 0;
    bool exhausted = false;
    while (!frontier.empty() && depth + 1 + floor < best && !exhausted) {
      std::vector<std::vector<int>> next;
      for (const auto& x : frontier) {
        for (size_t s = 0; s < x.size() && !exhausted; ++s) {
          for (size_t len = 1; s + len <= x.size() && !exhausted; ++len) {
            for (size_t to = 0; to + len <= x.size(); ++to) {
              if (to == s) continue;
              auto y = apply_shift(x, s, len, to);
              if (!seen.insert(y).second) continue;
              const size_t total = depth + 1 + edit_distance(r, y);
              if (total < best) {
                best = total;
                best_shifts = depth + 1;
              }
              next.push_back(std::move(y));
              if (seen.size() > options.max_search_states) {
                exhausted = true;
                break;
              }
            }
          }
        }
        if (exhausted) break;
      }
      frontier = std::move(next);
      ++depth;
    }
    result.exact = !exhausted;
    result.shifts = best_shifts;
    result.edit_distance = best - best_shifts;
    result.edits = best;
  }
  result.score = 100.0 * static_cast<double>(result.edits) / static_cast<double>(result.reference_length);
  return result;
}

double ter(std::span<const std::string> reference, std::span<const std::string> hypothesis, const TerOptions& options) {
  return ter_detail(reference, hypothesis, options).score;
}

double ter(std::string_view reference, std::string_view hypothesis, const TerOptions& options) {
  const auto r = text::tokenize(reference);
  const auto h = text::tokenize(hypothesis);
  return ter(std::span<const std::string>(r), std::span<const std::string>(h), options);
}

std::vector<double> average_ranks(std::span<const double> values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(ErrorKind::kValidation, "correlation inputs differ in length");
  if (a.size() < 2) fail(ErrorKind::kValidation, "correlation needs at least two observations");
}

}  // namespace

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

std::optional<double> kendall_tau_b(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  // O(n^2) pair scan; human-evaluation sets are small.
  long concordant = 0, discordant = 0, only_a_tied = 0, only_b_tied = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    for (size_t j = i + 1; j < a.size(); ++j) {
      const double da = a[i] - a[j], db = b[i] - b[j];
      if (da == 0.0 && db == 0.0) continue;
      if (da == 0.0) {
        ++only_a_tied;
      } else if (db == 0.0) {
        ++only_b_tied;
      } else if ((da > 0) == (db > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  // Pairs untied in a (resp. b).
  const double n0a = static_cast<double>(concordant + discordant + only_b_tied);
  const double n0b = static_cast<double>(concordant + discordant + only_a_tied);
  if (n0a == 0.0 || n0b == 0.0) return std::nullopt;
  return std::clamp(static_cast<double>(concordant - discordant) / std::sqrt(n0a * n0b), -1.0, 1.0);
}

Correlations correlations(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b);
  return Correlations{pearson(a, b), spearman(a, b), kendall_tau_b(a, b)};
}

}  // namespace ctxnoise::numerics
