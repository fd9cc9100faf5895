// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "ctxnoise/error.hpp"
#include "ctxnoise/mixgen.hpp"
#include "ctxnoise/text.hpp"

using namespace ctxnoise;
using namespace ctxnoise::mixgen;
using conditions::Condition;

namespace {

corpus::Dataset hindi(size_t n) {
  std::string data;
  for (size_t i = 0; i < n; ++i) {
    nlohmann::json row{{"id", "hi-" + std::to_string(i)},
                       {"source_lang", "hi"},
                       {"target_lang", "en"},
                       {"source_sentence", "वाक्य " + std::to_string(i) + " नौ दो ग्यारह"},
                       {"idiom_surface", "नौ दो ग्यारह"},
                       {"gold_meaning", "ran away " + std::to_string(i)},
                       {"reference_translation", "He ran away " + std::to_string(i)}};
    data += row.dump() + "\n";
  }
  return corpus::ingest_text(data, corpus::SourceFormat::parse("jsonl"), "hindi");
}

noise::NoiseSets noise_for(const corpus::Dataset& ds) {
  noise::OfflineNoiseGenerator gen;
  gateway::ResponseCache cache;
  return noise::synthesize_all(ds, gen, cache, noise::NoiseTemplates::load());
}

std::map<Condition, size_t> counts(const std::vector<TrainExample>& mix) {
  std::map<Condition, size_t> c;
  for (const auto& ex : mix) ++c[ex.condition];
  return c;
}

}  // namespace

TEST_CASE("mix composition at n = 507") {
  const auto ds = hindi(507);
  const auto noise = noise_for(ds);
  const auto vanilla = build_mix(ds, noise, Strategy::kVanilla, 1);
  CHECK(vanilla.size() == 1521);
  CHECK(counts(vanilla) == std::map<Condition, size_t>{{Condition::kNone, 1521}});
  const auto ali = build_mix(ds, noise, Strategy::kAli, 1);
  CHECK(ali.size() == 1521);
  CHECK(counts(ali) == std::map<Condition, size_t>{{Condition::kNone, 507}, {Condition::kOpposite, 1014}});
  const auto cda = build_mix(ds, noise, Strategy::kCda, 1);
  CHECK(cda.size() == 1521);
  CHECK(counts(cda) ==
        std::map<Condition, size_t>{{Condition::kNone, 507}, {Condition::kGold, 507}, {Condition::kOpposite, 507}});

  for (const auto* mix : {&vanilla, &ali, &cda}) {
    for (const auto& ex : *mix) {
      const auto& inst = ds.at(ex.instance_id);
      REQUIRE(ex.completion == "<translation>" + inst.reference_translation + "</translation>");
      const auto& set = noise.at(inst.id);
      for (auto k : noise::kAllKinds) REQUIRE(ex.completion.find(set.at(k)) == std::string::npos);
    }
  }
  // Opposite prompts carry the opposite meaning; copies are told apart by index.
  std::map<std::pair<std::string, int>, int> seen;
  for (const auto& ex : ali) {
    if (ex.condition != Condition::kOpposite) continue;
    REQUIRE(ex.prompt.find(noise.at(ex.instance_id).at(noise::NoiseKind::kOpposite)) != std::string::npos);
    ++seen[{ex.instance_id, ex.copy_index}];
  }
  CHECK(seen.size() == 1014);
}

TEST_CASE("small cda mix and every size") {
  const auto ds = hindi(2);
  const auto cda = build_mix(ds, noise_for(ds), Strategy::kCda, 9);
  CHECK(cda.size() == 6);
  CHECK(counts(cda) ==
        std::map<Condition, size_t>{{Condition::kNone, 2}, {Condition::kGold, 2}, {Condition::kOpposite, 2}});
  for (size_t n : {1, 3, 10, 33}) {
    const auto d = hindi(n);
    const auto nz = noise_for(d);
    for (auto s : {Strategy::kVanilla, Strategy::kAli, Strategy::kCda}) CHECK(build_mix(d, nz, s, n).size() == 3 * n);
  }
}

TEST_CASE("seeded shuffle") {
  const auto ds = hindi(40);
  const auto noise = noise_for(ds);
  auto key = [](const std::vector<TrainExample>& m) {
    std::vector<std::string> k;
    for (const auto& ex : m) k.push_back(ex.instance_id + "/" + std::to_string(static_cast<int>(ex.condition)) + "/" +
                                         std::to_string(ex.copy_index));
    return k;
  };
  CHECK(key(build_mix(ds, noise, Strategy::kAli, 5)) == key(build_mix(ds, noise, Strategy::kAli, 5)));
  CHECK(key(build_mix(ds, noise, Strategy::kAli, 5)) != key(build_mix(ds, noise, Strategy::kAli, 6)));
}

TEST_CASE("missing noise is an error for noisy strategies only") {
  const auto ds = hindi(3);
  auto noise = noise_for(ds);
  noise.erase("hi-1");
  CHECK_NOTHROW(build_mix(ds, noise, Strategy::kVanilla, 1));
  CHECK_THROWS_WITH(build_mix(ds, noise, Strategy::kAli, 1), Catch::Matchers::ContainsSubstring("hi-1"));
  CHECK_THROWS_AS(parse_strategy("mixup"), Error);
}

TEST_CASE("manifest and training file") {
  const auto ds = hindi(12);
  const auto noise = noise_for(ds);
  const auto dir = std::filesystem::temp_directory_path() / "ctxnoise_mix";
  std::filesystem::remove_all(dir);
  const auto a = emit_manifest(Strategy::kAli, build_mix(ds, noise, Strategy::kAli, 3), (dir / "a").string(), 3);
  const auto b = emit_manifest(Strategy::kAli, build_mix(ds, noise, Strategy::kAli, 3), (dir / "b").string(), 3);
  CHECK(a.manifest["hyperparameters"]["rank"] == 16);
  CHECK(a.manifest["hyperparameters"]["alpha"] == 16);
  CHECK(a.manifest["hyperparameters"]["epochs"] == 50);
  CHECK(a.manifest["hyperparameters"]["batch_size"] == 2);
  CHECK(a.manifest["hyperparameters"]["learning_rate"] == 2e-4);
  CHECK(a.manifest["examples"] == 36);
  CHECK(a.manifest["condition_counts"]["opposite"] == 24);
  CHECK(text::read_file(a.train_path) == text::read_file(b.train_path));
  CHECK(text::read_file(a.manifest_path) == text::read_file(b.manifest_path));
  const auto first = nlohmann::json::parse(text::read_file(a.train_path).substr(0, text::read_file(a.train_path).find('\n')));
  CHECK(first.contains("prompt"));
  CHECK(first.contains("completion"));
  CHECK(first["meta"]["strategy"] == "ali");
  std::filesystem::remove_all(dir);
}
