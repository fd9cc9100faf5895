// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxnoise/conditions.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include "ctxnoise/error.hpp"
#include "ctxnoise/jsonl.hpp"
#include "ctxnoise/templates.hpp"
#include "ctxnoise/text.hpp"

namespace ctxnoise::conditions {

using nlohmann::json;

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::kNone: return "none";
    case Condition::kGold: return "gold";
    case Condition::kStruct: return "struct";
    case Condition::kLiteral: return "literal";
    case Condition::kSemantic: return "semantic";
    case Condition::kOpposite: return "opposite";
  }
  return "none";
}

Condition parse_condition(std::string_view name) {
  for (auto c : kAllConditions) {
    if (to_string(c) == name) return c;
  }
  fail(ErrorKind::kConfig, "unknown condition: " + std::string(name));
}

std::vector<Condition> parse_conditions(std::string_view list) {
  if (text::trim(list) == "all") return {kAllConditions.begin(), kAllConditions.end()};
  std::vector<Condition> out;
  size_t start = 0;
  while (start <= list.size()) {
    size_t end = list.find(',', start);
    if (end == std::string_view::npos) end = list.size();
    const std::string item = text::trim(list.substr(start, end - start));
    if (!item.empty()) {
      const Condition c = parse_condition(item);
      if (std::find(out.begin(), out.end(), c) != out.end()) fail(ErrorKind::kConfig, "condition listed twice: " + item);
      out.push_back(c);
    }
    start = end + 1;
  }
  if (out.empty()) fail(ErrorKind::kConfig, "no conditions given");
  return out;
}

std::optional<noise::NoiseKind> noise_kind(Condition c) {
  switch (c) {
    case Condition::kStruct: return noise::NoiseKind::kStruct;
    case Condition::kLiteral: return noise::NoiseKind::kLiteral;
    case Condition::kSemantic: return noise::NoiseKind::kSemantic;
    case Condition::kOpposite: return noise::NoiseKind::kOpposite;
    default: return std::nullopt;
  }
}

PromptTemplates PromptTemplates::load(std::string_view target_lang, const std::optional<std::string>& dir) {
  PromptTemplates t;
  const std::string specific = "translate_" + std::string(target_lang);
  bool found = false;
  if (dir) {
    const std::string path = *dir + "/" + specific + ".txt";
    if (std::filesystem::exists(path)) {
      t.translate = text::read_file(path);
      found = true;
    }
  }
  if (!found) {
    const auto shipped = templates::names();
    t.translate = std::find(shipped.begin(), shipped.end(), specific) != shipped.end()
                      ? templates::builtin(specific)
                      : templates::load("translate", dir);
  }
  t.context_block = text::trim(templates::load("context_block", dir));
  if (t.translate.find("{source_sentence}") == std::string::npos) {
    fail(ErrorKind::kConfig, "translation template lacks a {source_sentence} slot");
  }
  if (t.translate.find("{context_block}") == std::string::npos) {
    fail(ErrorKind::kConfig, "translation template lacks a {context_block} slot");
  }
  return t;
}

json to_json(const TranslationTask& task) {
  json j{{"instance_id", task.instance_id},
         {"condition", std::string(to_string(task.condition))},
         {"context_text", task.context_text ? json(*task.context_text) : json(nullptr)},
         {"prompt", task.prompt},
         {"pair", task.pair_key},
         {"source_sentence", task.source_sentence},
         {"idiom_surface", task.idiom_surface}};
  return j;
}

TranslationTask task_from_json(const json& j) {
  TranslationTask t;
  t.instance_id = j.at("instance_id").get<std::string>();
  t.condition = parse_condition(j.at("condition").get<std::string>());
  if (j.contains("context_text") && !j["context_text"].is_null()) t.context_text = j["context_text"].get<std::string>();
  t.prompt = j.at("prompt").get<std::string>();
  t.pair_key = j.value("pair", std::string());
  t.source_sentence = j.value("source_sentence", std::string());
  t.idiom_surface = j.value("idiom_surface", std::string());
  if (t.context_text.has_value() == (t.condition == Condition::kNone)) {
    fail(ErrorKind::kValidation, "task " + t.instance_id + "/" + std::string(to_string(t.condition)) +
                                     ": context_text must be absent exactly for the none condition");
  }
  return t;
}

std::optional<std::string> context_for(const corpus::IdiomInstance& instance, Condition condition,
                                       const noise::NoiseSets& noise) {
  if (condition == Condition::kNone) return std::nullopt;
  if (condition == Condition::kGold) return instance.gold_meaning;
  const auto kind = *noise_kind(condition);
  auto it = noise.find(instance.id);
  if (it == noise.end()) fail(ErrorKind::kValidation, "no NoiseSet for instance " + instance.id);
  auto m = it->second.meanings.find(kind);
  if (m == it->second.meanings.end() || m->second.empty()) {
    fail(ErrorKind::kValidation,
         "NoiseSet for instance " + instance.id + " lacks " + std::string(noise::to_string(kind)) + " noise");
  }
  return m->second;
}

std::string build_prompt(const corpus::IdiomInstance& instance, const std::optional<std::string>& context_text,
                         const PromptTemplates& templates) {
  std::string tpl = templates.translate;
  std::string block;
  if (context_text) {
    block = text::render(templates.context_block, {{"idiom", instance.idiom_surface}, {"context", *context_text}});
  } else {
    // Drop the whole line holding the slot so no empty block is left behind.
    const size_t pos = tpl.find("{context_block}");
    const size_t line_start = tpl.rfind('\n', pos) == std::string::npos ? 0 : tpl.rfind('\n', pos) + 1;
    const size_t line_end = tpl.find('\n', pos);
    const std::string before = tpl.substr(line_start, pos - line_start);
    const size_t after_start = pos + std::string_view("{context_block}").size();
    const std::string after = tpl.substr(after_start, (line_end == std::string::npos ? tpl.size() : line_end) - after_start);
    if (text::trim(before).empty() && text::trim(after).empty()) {
      tpl.erase(line_start, line_end == std::string::npos ? std::string::npos : line_end - line_start + 1);
    }
  }
  return text::render(tpl, {{"source_language", noise::language_name(instance.pair.source_lang)},
                            {"target_language", noise::language_name(instance.pair.target_lang)},
                            {"source_sentence", instance.source_sentence},
                            {"context_block", block}});
}

TranslationTask make_task(const corpus::IdiomInstance& instance, Condition condition, const noise::NoiseSets& noise,
                          const PromptTemplates& templates) {
  TranslationTask t;
  t.instance_id = instance.id;
  t.condition = condition;
  t.context_text = context_for(instance, condition, noise);
  t.prompt = build_prompt(instance, t.context_text, templates);
  t.pair_key = instance.pair.key();
  t.source_sentence = instance.source_sentence;
  t.idiom_surface = instance.idiom_surface;
  return t;
}

std::vector<TranslationTask> expand_matrix(const corpus::Dataset& dataset, const std::vector<Condition>& conditions,
                                           const noise::NoiseSets& noise,
                                           const std::optional<std::string>& template_dir) {
  std::map<std::string, PromptTemplates> by_target;
  std::vector<TranslationTask> out;
  out.reserve(dataset.size() * conditions.size());
  for (const auto& inst : dataset.instances()) {
    auto it = by_target.find(inst.pair.target_lang);
    if (it == by_target.end()) {
      it = by_target.emplace(inst.pair.target_lang, PromptTemplates::load(inst.pair.target_lang, template_dir)).first;
    }
    for (auto c : conditions) out.push_back(make_task(inst, c, noise, it->second));
  }
  return out;
}

void write_jsonl(const std::string& path, const std::vector<TranslationTask>& tasks) {
  std::vector<json> rows;
  rows.reserve(tasks.size());
  for (const auto& t : tasks) rows.push_back(to_json(t));
  jsonl::write(path, rows);
}

std::vector<TranslationTask> load_jsonl(const std::string& path) {
  std::vector<TranslationTask> out;
  for (const auto& line : jsonl::read(path)) {
    try {
      out.push_back(task_from_json(line.value));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail(ErrorKind::kValidation, path + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ctxnoise::conditions
