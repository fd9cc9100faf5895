// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// Fine-tuning data mixes. Every strategy renders each training instance three
// times; the target is always the reference translation.
//   vanilla  3 x none
//   ali      2 x opposite + 1 x none
//   cda      1 x opposite + 1 x none + 1 x gold

#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxnoise/conditions.hpp"
#include "ctxnoise/corpus.hpp"
#include "ctxnoise/noise.hpp"

namespace ctxnoise::mixgen {

enum class Strategy { kVanilla, kAli, kCda };
std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view name);

/// Conditions rendered per instance, one entry per copy.
std::vector<conditions::Condition> composition(Strategy s);

struct TrainExample {
  std::string prompt;
  std::string completion;
  std::string instance_id;
  std::string pair_key;
  conditions::Condition condition = conditions::Condition::kNone;
  int copy_index = 0;  // distinguishes repeated renderings under one condition

  /// {"prompt", "completion", "meta": {...}}
  nlohmann::json to_json(Strategy strategy) const;
};

/// 3 x |train_set| examples in a seeded shuffle. Completions wrap the
/// reference in the same delimiters the translation prompt asks for.
std::vector<TrainExample> build_mix(const corpus::Dataset& train_set, const noise::NoiseSets& noise,
                                    Strategy strategy, uint64_t seed,
                                    const std::optional<std::string>& template_dir = std::nullopt);

struct Hyperparameters {
  int lora_rank = 16;
  int lora_alpha = 16;
  int epochs = 50;
  int batch_size = 2;
  double learning_rate = 2e-4;
  std::string optimizer = "adamw";
  std::string schedule = "linear_warmup_cosine";

  nlohmann::json to_json() const;
};

struct EmittedMix {
  std::string train_path;
  std::string manifest_path;
  nlohmann::json manifest;
};

/// Writes <out_dir>/train.jsonl and <out_dir>/manifest.json atomically.
EmittedMix emit_manifest(Strategy strategy, const std::vector<TrainExample>& examples, const std::string& out_dir,
                         uint64_t seed, const Hyperparameters& hp = {});

}  // namespace ctxnoise::mixgen
