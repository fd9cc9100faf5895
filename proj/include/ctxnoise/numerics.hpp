// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// Metrics shared by the validation, evaluation and decoding code: translation
// edit rate, Shannon entropy, and linear/rank correlations.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ctxnoise::numerics {

inline constexpr double kProbTolerance = 1e-9;

/// Probability vector. Construction validates non-negativity and unit sum.
class ProbVector {
 public:
  explicit ProbVector(std::vector<double> probs, double tolerance = kProbTolerance);

  std::span<const double> values() const noexcept { return probs_; }
  size_t size() const noexcept { return probs_.size(); }

 private:
  std::vector<double> probs_;
};

/// H(p) = -sum p ln p in nats, with 0 ln 0 = 0.
double shannon_entropy(const ProbVector& p);
/// Same, validating the raw span first (throws on unnormalized input).
double shannon_entropy(std::span<const double> p, double tolerance = kProbTolerance);

enum class TerMode {
  kShifts,        // block shifts (unit cost) + insert/delete/substitute
  kEditDistance,  // plain word-level Levenshtein
};

struct TerOptions {
  TerMode mode = TerMode::kShifts;
  // Upper bound on distinct hypothesis orderings explored by the exact shift
  // search. Past it the result falls back to the greedy shift heuristic.
  size_t max_search_states = 200000;
};

struct TerResult {
  double score = 0.0;      // 100 * edits / |reference|
  size_t edits = 0;        // shifts + edit_distance
  size_t shifts = 0;
  size_t edit_distance = 0;
  size_t reference_length = 0;
  bool exact = true;       // false when the state budget was exhausted
};

TerResult ter_detail(std::span<const std::string> reference, std::span<const std::string> hypothesis,
                     const TerOptions& options = {});

/// Percent TER over word sequences; throws on an empty reference.
double ter(std::span<const std::string> reference, std::span<const std::string> hypothesis,
           const TerOptions& options = {});

/// TER over raw strings using text::tokenize (punctuation detached, whitespace split).
double ter(std::string_view reference, std::string_view hypothesis, const TerOptions& options = {});

/// Word-level Levenshtein distance with unit costs.
size_t edit_distance(std::span<const int> reference, std::span<const int> hypothesis);

/// One-shot greedy shift search (tercom style): repeatedly applies the single
/// exact-match block shift with the largest positive gain.
size_t greedy_shift_edits(std::span<const int> reference, std::span<const int> hypothesis, size_t* shifts = nullptr);

struct Correlations {
  std::optional<double> pearson;
  std::optional<double> spearman;
  std::optional<double> kendall_tau_b;

  bool defined() const { return pearson && spearman && kendall_tau_b; }
};

/// Average ranks, 1-based; ties share their mean rank.
std::vector<double> average_ranks(std::span<const double> values);

std::optional<double> pearson(std::span<const double> a, std::span<const double> b);
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);
std::optional<double> kendall_tau_b(std::span<const double> a, std::span<const double> b);

/// All three coefficients. Each is nullopt (not NaN) when undefined, e.g. for a
/// constant input vector. Throws when |a| != |b| or |a| < 2.
Correlations correlations(std::span<const double> a, std::span<const double> b);

}  // namespace ctxnoise::numerics
