// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "../oracles.hpp"
#include "ctxnoise/ckplug.hpp"
#include "ctxnoise/error.hpp"
#include "ctxnoise/text.hpp"

using namespace ctxnoise;
using namespace ctxnoise::ckplug;
using gateway::TokenDistribution;

namespace {

const std::string kData = CTXNOISE_DATA;

nlohmann::json fixture_json() { return nlohmann::json::parse(text::read_file(kData + "/toylm.json")); }

oracle::BigramTables tables(const nlohmann::json& j) {
  oracle::BigramTables t;
  t.end = j["end_token"].get<std::string>();
  for (const auto& [prev, row] : j["base"].items()) t.base[prev] = row.get<oracle::Dist>();
  for (const auto& [prev, row] : j["context"].items()) t.context[prev] = row.get<oracle::Dist>();
  return t;
}

TokenDistribution random_dist(std::mt19937_64& rng, const std::vector<std::string>& vocab) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::map<std::string, double> m;
  double sum = 0;
  for (const auto& t : vocab) {
    if (u(rng) < 0.3) continue;
    m[t] = u(rng) * u(rng);
    sum += m[t];
  }
  if (m.empty() || sum == 0) return TokenDistribution({{vocab[0], 1.0}});
  double total = 0;
  for (auto& [t, p] : m) total += (p /= sum);
  m.begin()->second += 1.0 - total;
  return TokenDistribution(std::move(m));
}

const gateway::DualPrompt kPrompts{"Hint: the idiom 'x' means: y\\nTranslate", "Translate"};

}  // namespace

TEST_CASE("confidence gain") {
  const TokenDistribution uniform({{"a", 0.25}, {"b", 0.25}, {"c", 0.25}, {"d", 0.25}});
  const TokenDistribution one_hot({{"a", 1.0}});
  CHECK(confidence_gain(uniform, uniform) == 0.0);
  CHECK(confidence_gain(one_hot, uniform) == Catch::Approx(1.386294).margin(1e-6));
  CHECK(confidence_gain(uniform, one_hot) == Catch::Approx(-1.386294).margin(1e-6));
}

TEST_CASE("blend step arithmetic and branches") {
  const TokenDistribution ctx({{"a", 0.8}, {"b", 0.2}});
  const TokenDistribution internal({{"a", 0.2}, {"b", 0.8}});
  // Equal entropies: suppress.
  CHECK(blend_detail(ctx, internal, {}).branch == Branch::kSuppress);
  const TokenDistribution sharper({{"a", 0.9}, {"b", 0.1}});
  const TokenDistribution flat({{"a", 0.5}, {"b", 0.5}});
  const auto b = blend_detail(sharper, flat, {0.5});
  CHECK(b.branch == Branch::kBlend);
  CHECK(b.distribution.prob("a") == Catch::Approx(0.7));
  const TokenDistribution c2({{"a", 0.8}, {"b", 0.2}});
  const TokenDistribution i2({{"a", 0.2}, {"b", 0.3}, {"c", 0.25}, {"d", 0.25}});
  const auto mixed = blend_step(c2, i2, {0.5});
  CHECK(mixed.prob("a") == Catch::Approx(0.5));
  CHECK(mixed.prob("b") == Catch::Approx(0.25));
  CHECK(mixed.prob("c") == Catch::Approx(0.125));
  CHECK(blend_step(internal, internal, {}).entries() == internal.entries());
  const auto full = blend_step(c2, i2, {1.0});
  for (const auto& tok : {"a", "b", "c", "d"}) CHECK(full.prob(tok) == c2.prob(tok));
  CHECK_THROWS_AS(blend_step(c2, i2, {1.5}), Error);
}

TEST_CASE("blend properties over random distribution pairs") {
  std::mt19937_64 rng(20240611);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f", "g", "h"};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const auto c = random_dist(rng, vocab);
    const auto p = random_dist(rng, vocab);
    const BlendConfig cfg{u(rng)};
    const auto r = blend_detail(c, p, cfg);
    double sum = 0;
    for (const auto& [t, v] : r.distribution.entries()) sum += v;
    REQUIRE(std::abs(sum - 1.0) <= 1e-9);
    REQUIRE((r.branch == Branch::kBlend) == (r.cg > 0));
    if (r.branch == Branch::kSuppress) REQUIRE(r.distribution.entries() == p.entries());
    REQUIRE(blend_step(c, p, {0.0}).argmax() == p.argmax());
    if (confidence_gain(c, p) > 0) REQUIRE(blend_step(c, p, {1.0}).argmax() == c.argmax());
  }
}

TEST_CASE("decode follows the oracle on the ToyLM fixture") {
  const auto j = fixture_json();
  auto lm = gateway::ToyLM::from_json(j);
  const auto t = tables(j);
  for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    std::vector<std::string> branches;
    const auto expected = oracle::ckplug_decode(t, alpha, 16, &branches);
    const auto got = decode_with_ckplug(lm, kPrompts, gateway::DecodeParams::greedy_decoding(16), {alpha});
    CHECK(got.tokens == expected);
    REQUIRE(got.steps.size() == branches.size());
    for (size_t i = 0; i < branches.size(); ++i) CHECK(to_string(got.steps[i].branch) == branches[i]);
  }
  // The sharper but wrong context pulls the blended path to "saved".
  const auto half = decode_with_ckplug(lm, kPrompts, gateway::DecodeParams::greedy_decoding(16), {0.5});
  CHECK(half.record.output_translation == "money saved");
  CHECK(half.steps[1].branch == Branch::kBlend);
  CHECK(half.steps[1].cg > 0);
}

TEST_CASE("alpha zero and context-free fixtures reduce to plain greedy") {
  auto j = fixture_json();
  auto lm = gateway::ToyLM::from_json(j);
  const auto internal = decode_greedy(lm, kPrompts.without_context, gateway::DecodeParams::greedy_decoding(16));
  CHECK(internal.record.output_translation == "money went down the drain");
  const auto zero = decode_with_ckplug(lm, kPrompts, gateway::DecodeParams::greedy_decoding(16), {0.0});
  CHECK(zero.tokens == internal.tokens);

  j["context"] = j["base"];
  auto same = gateway::ToyLM::from_json(j);
  const auto r = decode_with_ckplug(same, kPrompts, gateway::DecodeParams::greedy_decoding(16), {0.5});
  CHECK(r.tokens == internal.tokens);
  for (const auto& s : r.steps) CHECK(s.branch == Branch::kSuppress);
}

TEST_CASE("decode stops at max tokens and flags model failures") {
  auto j = fixture_json();
  auto lm = gateway::ToyLM::from_json(j);
  const auto short_run = decode_with_ckplug(lm, kPrompts, gateway::DecodeParams::greedy_decoding(1), {0.5});
  CHECK(short_run.tokens == std::vector<std::string>{"money"});
  CHECK_FALSE(short_run.record.partial);

  j["base"].erase("saved");
  auto broken = gateway::ToyLM::from_json(j);
  const auto r = decode_with_ckplug(broken, kPrompts, gateway::DecodeParams::greedy_decoding(16), {0.5});
  CHECK(r.record.partial);
  CHECK(r.tokens == std::vector<std::string>{"money", "saved"});
  CHECK(r.steps.size() == 2);
  CHECK_THROWS_AS(decode_with_ckplug(lm, kPrompts, gateway::DecodeParams::sampled(1.0), {0.5}), Error);
}
