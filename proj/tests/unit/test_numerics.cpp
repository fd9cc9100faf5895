// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "ctxnoise/error.hpp"
#include "ctxnoise/numerics.hpp"
#include "ctxnoise/text.hpp"

using namespace ctxnoise;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<std::string> words(const std::string& s) { return text::tokenize(s); }

std::vector<int> to_ids(const std::vector<std::string>& r, const std::vector<std::string>& h, bool ref) {
  std::map<std::string, int> ids;
  for (const auto& w : r) ids.emplace(w, static_cast<int>(ids.size()));
  for (const auto& w : h) ids.emplace(w, static_cast<int>(ids.size()));
  std::vector<int> out;
  for (const auto& w : ref ? r : h) out.push_back(ids.at(w));
  return out;
}

}  // namespace

TEST_CASE("ter of identical sequences is zero") {
  const auto x = words("kick the bucket");
  CHECK(numerics::ter(x, x) == 0.0);
}

TEST_CASE("ter of reordered gold meaning matches the exhaustive oracle") {
  const auto ref = words("down the drain");
  const auto hyp = words("drain the down");
  const auto r = to_ids(ref, hyp, true), h = to_ids(ref, hyp, false);
  const int edits = oracle::ter_edits(r, oracle::shift_distances(h));
  REQUIRE(edits == 2);  // frozen from the oracle
  CHECK_THAT(numerics::ter(ref, hyp), WithinAbs(100.0 * 2 / 3, 1e-12));
}

TEST_CASE("ter of empty hypothesis is one hundred") {
  const auto ref = words("down the drain");
  CHECK(numerics::ter(ref, std::vector<std::string>{}) == 100.0);
}

TEST_CASE("ter rejects an empty reference") {
  CHECK_THROWS_AS(numerics::ter(std::vector<std::string>{}, words("a")), Error);
}

TEST_CASE("ter needs multi-shift search where greedy stalls") {
  // Every single shift has zero gain here; two shifts reach cost 2.
  const std::vector<std::string> ref{"c", "b", "a", "a"}, hyp{"a", "c", "a", "b"};
  const auto detail = numerics::ter_detail(ref, hyp);
  CHECK(detail.edits == 2);
  CHECK(detail.shifts == 2);
  CHECK(detail.exact);
  const auto r = to_ids(ref, hyp, true), h = to_ids(ref, hyp, false);
  size_t greedy_shifts = 0;
  CHECK(numerics::greedy_shift_edits(r, h, &greedy_shifts) == 3);
}

TEST_CASE("ter edit-distance mode ignores shifts") {
  numerics::TerOptions opts;
  opts.mode = numerics::TerMode::kEditDistance;
  const auto ref = words("a b c d"), hyp = words("c d a b");
  CHECK(numerics::ter_detail(ref, hyp, opts).edits == 4);
  CHECK(numerics::ter_detail(ref, hyp).edits == 1);
}

TEST_CASE("ter is invariant to global case folding") {
  std::mt19937 rng(11);
  const std::vector<std::string> vocab{"Down", "the", "DRAIN", "Well", "ÄPFEL"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> r, h;
    const int nr = 1 + static_cast<int>(rng() % 5), nh = static_cast<int>(rng() % 6);
    for (int i = 0; i < nr; ++i) r.push_back(vocab[rng() % vocab.size()]);
    for (int i = 0; i < nh; ++i) h.push_back(vocab[rng() % vocab.size()]);
    std::vector<std::string> rf, hf;
    for (const auto& w : r) rf.push_back(text::casefold(w));
    for (const auto& w : h) hf.push_back(text::casefold(w));
    CHECK(numerics::ter(r, h) == numerics::ter(rf, hf));
    CHECK(numerics::ter(r, r) == 0.0);
  }
}

TEST_CASE("ter matches exhaustive oracle on short sequences over three words") {
  std::vector<std::vector<int>> all;
  for (int n = 0; n <= 4; ++n) {
    int total = 1;
    for (int i = 0; i < n; ++i) total *= 3;
    for (int c = 0; c < total; ++c) {
      std::vector<int> s;
      for (int i = 0, x = c; i < n; ++i, x /= 3) s.push_back(x % 3);
      all.push_back(s);
    }
  }
  auto name = [](const std::vector<int>& s) {
    std::vector<std::string> out;
    for (int v : s) out.push_back("w" + std::to_string(v));
    return out;
  };
  for (const auto& h : all) {
    const auto reach = oracle::shift_distances(h);
    for (const auto& r : all) {
      if (r.empty()) continue;
      const auto d = numerics::ter_detail(name(r), name(h));
      REQUIRE(static_cast<int>(d.edits) == oracle::ter_edits(r, reach));
    }
  }
}

TEST_CASE("ter falls back to greedy past the state budget") {
  numerics::TerOptions opts;
  opts.max_search_states = 3;
  const auto ref = words("a b c d e f"), hyp = words("f e d c b a");
  const auto d = numerics::ter_detail(ref, hyp, opts);
  CHECK_FALSE(d.exact);
  CHECK(d.edits <= 6);
}

TEST_CASE("tokenization detaches punctuation") {
  CHECK(text::tokenize("down, the drain!") == std::vector<std::string>{"down", ",", "the", "drain", "!"});
}

TEST_CASE("entropy analytic values") {
  CHECK(numerics::shannon_entropy(numerics::ProbVector({1.0, 0.0, 0.0})) == 0.0);
  CHECK_THAT(numerics::shannon_entropy(numerics::ProbVector({0.25, 0.25, 0.25, 0.25})), WithinAbs(std::log(4.0), 1e-12));
  CHECK_THAT(numerics::shannon_entropy(numerics::ProbVector({0.5, 0.5})), WithinAbs(0.693147, 1e-6));
}

TEST_CASE("entropy rejects unnormalized input") {
  CHECK_THROWS_AS(numerics::ProbVector({0.5, 0.6}), Error);
  CHECK_THROWS_AS(numerics::ProbVector({1.2, -0.2}), Error);
  const std::vector<double> bad{0.3, 0.3};
  CHECK_THROWS_AS(numerics::shannon_entropy(bad), Error);
}

TEST_CASE("entropy lies between zero and ln k") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const size_t k = 1 + rng() % 12;
    std::vector<double> p(k);
    double s = 0;
    for (auto& x : p) s += (x = u(rng));
    for (auto& x : p) x /= s;
    const double h = numerics::shannon_entropy(p);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(static_cast<double>(k)) + 1e-12);
  }
}

TEST_CASE("correlations of identical and negated vectors") {
  const std::vector<double> a{0.3, 1.7, 2.2, 5.0, 4.1};
  std::vector<double> neg;
  for (double x : a) neg.push_back(-x);
  const auto same = numerics::correlations(a, a);
  CHECK_THAT(*same.pearson, WithinAbs(1.0, 1e-12));
  CHECK_THAT(*same.spearman, WithinAbs(1.0, 1e-12));
  CHECK_THAT(*same.kendall_tau_b, WithinAbs(1.0, 1e-12));
  const auto anti = numerics::correlations(a, neg);
  CHECK_THAT(*anti.pearson, WithinAbs(-1.0, 1e-12));
  CHECK_THAT(*anti.spearman, WithinAbs(-1.0, 1e-12));
  CHECK_THAT(*anti.kendall_tau_b, WithinAbs(-1.0, 1e-12));
}

TEST_CASE("correlations on the five-point fixture match the brute-force oracle") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{1, 3, 2, 5, 4};
  const auto c = numerics::correlations(a, b);
  CHECK_THAT(*c.pearson, WithinAbs(oracle::pearson(a, b), 1e-12));
  CHECK_THAT(*c.spearman, WithinAbs(oracle::spearman(a, b), 1e-12));
  CHECK_THAT(*c.kendall_tau_b, WithinAbs(oracle::kendall_tau_b(a, b), 1e-12));
  // frozen from the oracle
  CHECK_THAT(*c.pearson, WithinAbs(0.8, 1e-12));
  CHECK_THAT(*c.spearman, WithinAbs(0.8, 1e-12));
  CHECK_THAT(*c.kendall_tau_b, WithinAbs(0.6, 1e-12));
}

TEST_CASE("correlations with ties agree with the oracle") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 2 + rng() % 10;
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = static_cast<double>(rng() % 4);
    for (auto& x : b) x = static_cast<double>(rng() % 4);
    const auto c = numerics::correlations(a, b);
    if (!c.defined()) continue;
    CHECK_THAT(*c.pearson, WithinAbs(oracle::pearson(a, b), 1e-9));
    CHECK_THAT(*c.spearman, WithinAbs(oracle::spearman(a, b), 1e-9));
    CHECK_THAT(*c.kendall_tau_b, WithinAbs(oracle::kendall_tau_b(a, b), 1e-9));
  }
}

TEST_CASE("spearman equals pearson on ranks for tie-free input") {
  std::mt19937 rng(9);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const size_t n = 2 + rng() % 30;
    std::vector<double> a(n), b(n);
    for (auto& x : a) x = g(rng);
    for (auto& x : b) x = g(rng);
    const auto ra = numerics::average_ranks(a), rb = numerics::average_ranks(b);
    CHECK(*numerics::spearman(a, b) == *numerics::pearson(ra, rb));
  }
}

TEST_CASE("constant vector yields undefined flags rather than NaN") {
  const std::vector<double> a{2, 2, 2}, b{1, 2, 3};
  const auto c = numerics::correlations(a, b);
  CHECK_FALSE(c.pearson.has_value());
  CHECK_FALSE(c.spearman.has_value());
  CHECK_FALSE(c.kendall_tau_b.has_value());
  CHECK_FALSE(c.defined());
}

TEST_CASE("correlations reject mismatched or too-short input") {
  const std::vector<double> a{1, 2}, b{1, 2, 3}, one{1};
  CHECK_THROWS_AS(numerics::correlations(a, b), Error);
  CHECK_THROWS_AS(numerics::correlations(one, one), Error);
}
