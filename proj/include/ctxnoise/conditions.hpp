// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// The six-condition experiment matrix and translation prompt assembly.

#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxnoise/corpus.hpp"
#include "ctxnoise/noise.hpp"

namespace ctxnoise::conditions {

enum class Condition { kNone, kGold, kStruct, kLiteral, kSemantic, kOpposite };

inline constexpr std::array<Condition, 6> kAllConditions = {Condition::kNone,    Condition::kGold,
                                                            Condition::kStruct,  Condition::kLiteral,
                                                            Condition::kSemantic, Condition::kOpposite};

std::string_view to_string(Condition c);
Condition parse_condition(std::string_view name);
/// Comma-separated list, or "all".
std::vector<Condition> parse_conditions(std::string_view list);

/// The noise kind behind a noisy condition; nullopt for none and gold.
std::optional<noise::NoiseKind> noise_kind(Condition c);

struct PromptTemplates {
  std::string translate;
  std::string context_block;

  /// translate_<target>.txt if present, else translate.txt; dir first, then
  /// the shipped copies.
  static PromptTemplates load(std::string_view target_lang, const std::optional<std::string>& dir = std::nullopt);
};

struct TranslationTask {
  std::string instance_id;
  Condition condition = Condition::kNone;
  std::optional<std::string> context_text;
  std::string prompt;
  // Carried for offline doubles and reporting.
  std::string pair_key;
  std::string source_sentence;
  std::string idiom_surface;
};

nlohmann::json to_json(const TranslationTask& task);
TranslationTask task_from_json(const nlohmann::json& j);

/// The context text c for a condition: absent for none, the gold meaning for
/// gold, the matching noise meaning otherwise.
std::optional<std::string> context_for(const corpus::IdiomInstance& instance, Condition condition,
                                       const noise::NoiseSets& noise);

/// Renders the translation prompt. For none the context block line is
/// dropped entirely.
std::string build_prompt(const corpus::IdiomInstance& instance, const std::optional<std::string>& context_text,
                         const PromptTemplates& templates);

TranslationTask make_task(const corpus::IdiomInstance& instance, Condition condition, const noise::NoiseSets& noise,
                          const PromptTemplates& templates);

/// Instance-major, conditions in the order given. Templates are resolved per
/// target language from `template_dir` (shipped text otherwise).
std::vector<TranslationTask> expand_matrix(const corpus::Dataset& dataset, const std::vector<Condition>& conditions,
                                           const noise::NoiseSets& noise,
                                           const std::optional<std::string>& template_dir = std::nullopt);

void write_jsonl(const std::string& path, const std::vector<TranslationTask>& tasks);
std::vector<TranslationTask> load_jsonl(const std::string& path);

}  // namespace ctxnoise::conditions
