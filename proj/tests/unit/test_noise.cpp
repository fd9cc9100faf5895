// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <filesystem>
#include <map>

#include "ctxnoise/error.hpp"
#include "ctxnoise/noise.hpp"

using namespace ctxnoise;
using noise::NoiseKind;

namespace {

const std::string kFixtures = CTXNOISE_FIXTURES;

// Answers by noise kind; the reply list for a kind is consumed one call at a time.
class ScriptedGenerator final : public gateway::ChatClient {
 public:
  explicit ScriptedGenerator(std::initializer_list<std::pair<const std::string, std::vector<std::string>>> replies) : replies_(std::move(replies)) {}
  gateway::ChatResponse complete(const gateway::ChatRequest& request) override {
    ++calls_;
    auto& list = replies_.at(request.vars.at("kind"));
    auto& pos = positions_[request.vars.at("kind")];
    gateway::ChatResponse r;
    r.content = list[std::min(pos, list.size() - 1)];
    ++pos;
    return r;
  }
  std::string model_id() const override { return "scripted"; }
  size_t calls() const override { return calls_; }

 private:
  std::map<std::string, std::vector<std::string>> replies_;
  std::map<std::string, size_t> positions_;
  std::atomic<size_t> calls_{0};
};

corpus::Dataset kankkula() {
  return corpus::ingest(kFixtures + "/corpus_ok.jsonl", corpus::SourceFormat::parse("jsonl"));
}

}  // namespace

TEST_CASE("synthesize the four noise kinds for a Finnish idiom") {
  const auto ds = kankkula();
  const auto& inst = ds.at("fi-0001");
  REQUIRE(inst.idiom_surface == "kankkulan kaivoon");
  ScriptedGenerator gen({{"struct", {"drain the down"}},
                         {"literal", {"\"to Kankkula's well\""}},
                         {"semantic", {"to Kankkula's house\n"}},
                         {"opposite", {"  to good use  "}}});
  gateway::ResponseCache cache;
  const auto set = noise::synthesize_set(inst, gen, cache, noise::NoiseTemplates::load());
  CHECK(set.at(NoiseKind::kStruct) == "drain the down");
  CHECK(set.at(NoiseKind::kLiteral) == "to Kankkula's well");
  CHECK(set.at(NoiseKind::kSemantic) == "to Kankkula's house");
  CHECK(set.at(NoiseKind::kOpposite) == "to good use");
  CHECK(set.complete());
  CHECK_NOTHROW(noise::check_invariants(set, inst));
  CHECK(gen.calls() == 4);
}

TEST_CASE("noise prompts carry the idiom and gold meaning") {
  const auto tpl = noise::NoiseTemplates::load();
  for (auto k : noise::kAllKinds) {
    const auto& t = tpl.by_kind.at(k);
    CHECK(t.find("{idiom}") != std::string::npos);
    CHECK(t.find("{gold_meaning}") != std::string::npos);
  }
  CHECK(tpl.digest().size() == 64);
}

TEST_CASE("a generator echoing gold for opposite is degenerate") {
  const auto ds = kankkula();
  const auto& inst = ds.at("fi-0001");
  ScriptedGenerator gen({{"opposite", {"Down the Drain"}}});
  gateway::ResponseCache cache;
  try {
    noise::synthesize_noise(inst, NoiseKind::kOpposite, gen, cache, noise::NoiseTemplates::load());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kValidation);
    CHECK(std::string(e.what()).find("degenerate noise") != std::string::npos);
  }
  CHECK(gen.calls() == 3);
}

TEST_CASE("retries recover from a degenerate first attempt") {
  const auto ds = kankkula();
  ScriptedGenerator gen({{"opposite", {"down the drain", "to good use"}}});
  gateway::ResponseCache cache;
  CHECK(noise::synthesize_noise(ds.at("fi-0001"), NoiseKind::kOpposite, gen, cache, noise::NoiseTemplates::load()) ==
        "to good use");
}

TEST_CASE("struct noise may coincide with gold") {
  const auto ds = kankkula();
  ScriptedGenerator gen({{"struct", {"down the drain"}}});
  gateway::ResponseCache cache;
  CHECK(noise::synthesize_noise(ds.at("fi-0001"), NoiseKind::kStruct, gen, cache, noise::NoiseTemplates::load()) ==
        "down the drain");
}

TEST_CASE("empty generations exhaust retries as an upstream error") {
  const auto ds = kankkula();
  ScriptedGenerator gen({{"literal", {"", "  \n", "\"\""}}});
  gateway::ResponseCache cache;
  try {
    noise::synthesize_noise(ds.at("fi-0001"), NoiseKind::kLiteral, gen, cache, noise::NoiseTemplates::load());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUpstream);
    CHECK(std::string(e.what()).find("empty generation") != std::string::npos);
  }
}

TEST_CASE("cached synthesis makes no further generator calls") {
  const auto ds = kankkula();
  noise::OfflineNoiseGenerator gen;
  gateway::ResponseCache cache;
  const auto a = noise::synthesize_all(ds, gen, cache, noise::NoiseTemplates::load(), {.concurrency = 2});
  const size_t first = gen.calls();
  CHECK(first == 4 * ds.size());
  const auto b = noise::synthesize_all(ds, gen, cache, noise::NoiseTemplates::load());
  CHECK(gen.calls() == first);
  REQUIRE(a.size() == b.size());
  for (const auto& [id, s] : a) CHECK(noise::to_json(s) == noise::to_json(b.at(id)));
  for (const auto& inst : ds.instances()) CHECK_NOTHROW(noise::check_invariants(a.at(inst.id), inst));
}

TEST_CASE("noise sets round-trip through JSONL") {
  const auto ds = kankkula();
  noise::OfflineNoiseGenerator gen;
  gateway::ResponseCache cache;
  const auto sets = noise::synthesize_all(ds, gen, cache, noise::NoiseTemplates::load());
  const auto path = (std::filesystem::temp_directory_path() / "ctxnoise_noise_rt.jsonl").string();
  noise::write_jsonl(path, sets);
  const auto back = noise::load_jsonl(path);
  REQUIRE(back.size() == sets.size());
  for (const auto& [id, s] : sets) CHECK(noise::to_json(back.at(id)) == noise::to_json(s));
  std::filesystem::remove(path);
}

TEST_CASE("check_invariants rejects incomplete and gold-equal sets") {
  const auto ds = kankkula();
  const auto& inst = ds.at("fi-0001");
  noise::NoiseSet s{inst.id, {{NoiseKind::kStruct, "drain the down"}}, "g", "h"};
  CHECK_THROWS_WITH(noise::check_invariants(s, inst), Catch::Matchers::ContainsSubstring("fi-0001"));
  s.meanings = {{NoiseKind::kStruct, "x"},
                {NoiseKind::kLiteral, "y"},
                {NoiseKind::kSemantic, "DOWN THE DRAIN"},
                {NoiseKind::kOpposite, "z"}};
  CHECK_THROWS_WITH(noise::check_invariants(s, inst), Catch::Matchers::ContainsSubstring("semantic"));
}

namespace {

noise::NoiseSets identity_sets(const corpus::Dataset& ds) {
  noise::NoiseSets sets;
  for (const auto& inst : ds.instances()) {
    sets[inst.id] = noise::NoiseSet{inst.id,
                                    {{NoiseKind::kStruct, inst.gold_meaning},
                                     {NoiseKind::kLiteral, "literal"},
                                     {NoiseKind::kSemantic, "semantic"},
                                     {NoiseKind::kOpposite, "opposite"}},
                                    "fixture",
                                    ""};
  }
  return sets;
}

}  // namespace

TEST_CASE("validate_noise identity case") {
  const auto ds = kankkula();
  noise::BagOfWordsSimilarity sim;
  noise::LexicalNli nli;
  const auto report = noise::validate_noise(ds, identity_sets(ds), sim, nli);
  CHECK(report.overall.ter_struct == 0.0);
  CHECK(report.overall.sim_g_struct == Catch::Approx(1.0).margin(1e-12));
  CHECK(report.overall.instances == ds.size());
  CHECK(report.per_pair.size() == ds.pairs().size());
}

TEST_CASE("validate_noise echoes stub scores") {
  // 20 instances; 17 of 20 opposite meanings labelled contradiction.
  std::string data;
  for (int i = 0; i < 20; ++i) {
    nlohmann::json row{{"id", "i" + std::to_string(i)},
                       {"source_lang", i % 2 ? "fi" : "fr"},
                       {"target_lang", "en"},
                       {"source_sentence", "a b idiom c"},
                       {"idiom_surface", "idiom"},
                       {"gold_meaning", "gold " + std::to_string(i)},
                       {"reference_translation", "ref"}};
    data += row.dump() + "\n";
  }
  const auto ds = corpus::ingest_text(data, corpus::SourceFormat::parse("jsonl"), "stub");
  noise::NoiseSets sets;
  for (const auto& inst : ds.instances()) {
    sets[inst.id] = noise::NoiseSet{inst.id,
                                    {{NoiseKind::kStruct, "S"},
                                     {NoiseKind::kLiteral, "L"},
                                     {NoiseKind::kSemantic, "M"},
                                     {NoiseKind::kOpposite, "O " + inst.id}},
                                    "fixture",
                                    ""};
  }
  noise::FunctionSimilarity sim([](const std::string& a, const std::string& b) {
    if (b == "S") return 0.92;
    if (b == "L") return 0.75;
    if (a == "L" && b == "M") return 0.82;
    if (b == "M") return 0.73;
    return 0.0;
  });
  noise::FunctionNli nli([](const std::string&, const std::string& h) {
    const int idx = std::stoi(h.substr(3));
    return idx < 17 ? noise::NliLabel::kContradiction : noise::NliLabel::kNeutral;
  });
  const auto r = noise::validate_noise(ds, sets, sim, nli).overall;
  CHECK(r.sim_g_struct == Catch::Approx(0.92));
  CHECK(r.sim_g_literal == Catch::Approx(0.75));
  CHECK(r.sim_literal_semantic == Catch::Approx(0.82));
  CHECK(r.sim_g_semantic == Catch::Approx(0.73));
  CHECK(r.cr_opposite == Catch::Approx(0.85));
  CHECK(r.contradictions == 17);
}

TEST_CASE("validate_noise clamps out-of-range similarity and rejects NaN") {
  const auto ds = kankkula();
  noise::FunctionSimilarity loud([](const std::string&, const std::string&) { return 1.5; });
  noise::LexicalNli nli;
  const auto r = noise::validate_noise(ds, identity_sets(ds), loud, nli);
  CHECK(r.overall.sim_g_struct == 1.0);
  CHECK(r.clamped_similarities == 4 * ds.size());
  noise::FunctionSimilarity nan([](const std::string&, const std::string&) { return std::nan(""); });
  CHECK_THROWS_AS(noise::validate_noise(ds, identity_sets(ds), nan, nli), Error);
}

TEST_CASE("validate_noise requires a set per instance") {
  const auto ds = kankkula();
  auto sets = identity_sets(ds);
  sets.erase("fr-0001");
  noise::BagOfWordsSimilarity sim;
  noise::LexicalNli nli;
  CHECK_THROWS_WITH(noise::validate_noise(ds, sets, sim, nli), Catch::Matchers::ContainsSubstring("fr-0001"));
}

TEST_CASE("NLI argmax and labels") {
  CHECK(noise::argmax_label({{noise::NliLabel::kEntailment, 0.1},
                             {noise::NliLabel::kNeutral, 0.2},
                             {noise::NliLabel::kContradiction, 0.7}}) == noise::NliLabel::kContradiction);
  CHECK(noise::parse_nli_label("CONTRADICTION") == noise::NliLabel::kContradiction);
  CHECK_THROWS_AS(noise::argmax_label({}), Error);
}
