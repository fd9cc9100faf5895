// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxnoise/mixgen.hpp"

#include <filesystem>
#include <map>

#include "ctxnoise/error.hpp"
#include "ctxnoise/jsonl.hpp"
#include "ctxnoise/rng.hpp"
#include "ctxnoise/text.hpp"

namespace ctxnoise::mixgen {

using conditions::Condition;
using nlohmann::json;

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kVanilla: return "vanilla";
    case Strategy::kAli: return "ali";
    case Strategy::kCda: return "cda";
  }
  return "vanilla";
}

Strategy parse_strategy(std::string_view name) {
  for (auto s : {Strategy::kVanilla, Strategy::kAli, Strategy::kCda}) {
    if (to_string(s) == name) return s;
  }
  fail(ErrorKind::kConfig, "unknown mix strategy: " + std::string(name));
}

std::vector<Condition> composition(Strategy s) {
  switch (s) {
    case Strategy::kVanilla: return {Condition::kNone, Condition::kNone, Condition::kNone};
    case Strategy::kAli: return {Condition::kOpposite, Condition::kOpposite, Condition::kNone};
    case Strategy::kCda: return {Condition::kOpposite, Condition::kNone, Condition::kGold};
  }
  return {};
}

json TrainExample::to_json(Strategy strategy) const {
  return json{{"prompt", prompt},
              {"completion", completion},
              {"meta",
               {{"instance_id", instance_id},
                {"pair", pair_key},
                {"condition", std::string(conditions::to_string(condition))},
                {"copy_index", copy_index},
                {"strategy", std::string(to_string(strategy))}}}};
}

std::vector<TrainExample> build_mix(const corpus::Dataset& train_set, const noise::NoiseSets& noise,
                                    Strategy strategy, uint64_t seed,
                                    const std::optional<std::string>& template_dir) {
  if (train_set.empty()) fail(ErrorKind::kValidation, "empty training set");
  const auto comp = composition(strategy);
  std::map<std::string, conditions::PromptTemplates> by_target;
  std::vector<TrainExample> out;
  out.reserve(train_set.size() * comp.size());
  for (const auto& inst : train_set.instances()) {
    auto tpl = by_target.find(inst.pair.target_lang);
    if (tpl == by_target.end()) {
      tpl = by_target
                .emplace(inst.pair.target_lang, conditions::PromptTemplates::load(inst.pair.target_lang, template_dir))
                .first;
    }
    std::map<Condition, int> copies;
    for (auto c : comp) {
      const auto task = conditions::make_task(inst, c, noise, tpl->second);
      TrainExample ex;
      ex.prompt = task.prompt;
      ex.completion = "<translation>" + inst.reference_translation + "</translation>";
      ex.instance_id = inst.id;
      ex.pair_key = inst.pair.key();
      ex.condition = c;
      ex.copy_index = copies[c]++;
      out.push_back(std::move(ex));
    }
  }
  auto gen = rng::make(seed, "mix:" + std::string(to_string(strategy)));
  rng::shuffle(out, gen);
  return out;
}

json Hyperparameters::to_json() const {
  return json{{"adapter", "lora"},       {"rank", lora_rank},   {"alpha", lora_alpha},
              {"epochs", epochs},        {"batch_size", batch_size}, {"learning_rate", learning_rate},
              {"optimizer", optimizer},  {"schedule", schedule}};
}

EmittedMix emit_manifest(Strategy strategy, const std::vector<TrainExample>& examples, const std::string& out_dir,
                         uint64_t seed, const Hyperparameters& hp) {
  std::vector<json> rows;
  rows.reserve(examples.size());
  std::map<std::string, size_t> counts;
  for (const auto& ex : examples) {
    rows.push_back(ex.to_json(strategy));
    ++counts[std::string(conditions::to_string(ex.condition))];
  }
  EmittedMix out;
  out.train_path = (std::filesystem::path(out_dir) / "train.jsonl").string();
  out.manifest_path = (std::filesystem::path(out_dir) / "manifest.json").string();
  const std::string body = jsonl::dump(rows);
  text::write_file_atomic(out.train_path, body);
  out.manifest = json{{"strategy", std::string(to_string(strategy))},
                      {"seed", seed},
                      {"examples", examples.size()},
                      {"condition_counts", counts},
                      {"train_file", "train.jsonl"},
                      {"train_sha256", text::sha256_hex(body)},
                      {"hyperparameters", hp.to_json()}};
  text::write_file_atomic(out.manifest_path, out.manifest.dump(2) + "\n");
  return out;
}

}  // namespace ctxnoise::mixgen
