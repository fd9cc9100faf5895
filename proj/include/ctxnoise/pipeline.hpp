// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// One-config experiment runs and the reports built from their artifacts.
//
// A run writes, under output_dir:
//   dataset.jsonl rejects.json sample.jsonl noise.jsonl [noise_validation.json]
//   tasks.jsonl translations.jsonl fidelity.jsonl car.jsonl
//   aggregate.csv fidelity_table.txt car.csv car_table.txt run_ledger.json
// Stages whose recorded inputs and outputs are unchanged are not redone.

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxnoise/client.hpp"
#include "ctxnoise/conditions.hpp"
#include "ctxnoise/corpus.hpp"
#include "ctxnoise/eval.hpp"
#include "ctxnoise/noise.hpp"

namespace ctxnoise::pipeline {

using nlohmann::json;

inline constexpr std::string_view kVersion = "0.1.0";

struct DatasetSource {
  std::string path;
  std::string format = "jsonl";  // corpus::SourceFormat descriptor
};

struct RunConfig {
  std::vector<DatasetSource> datasets;
  json tiers = json::object();     // pair key -> tier overrides
  std::vector<std::string> pairs;  // pair keys to keep; empty keeps all
  std::vector<conditions::Condition> conditions{conditions::kAllConditions.begin(),
                                                conditions::kAllConditions.end()};
  size_t sample_size = 200;
  uint64_t seed = 0;

  std::optional<gateway::EndpointConfig> translator;
  std::optional<gateway::EndpointConfig> judge;
  std::optional<gateway::EndpointConfig> generator;
  std::optional<gateway::EndpointConfig> similarity;
  std::optional<gateway::EndpointConfig> nli;

  gateway::DecodeParams translate_params = gateway::DecodeParams::greedy_decoding();
  eval::JudgeOptions judge_options;
  noise::SynthOptions synth_options;
  bool judge_fidelity = true;
  bool judge_car = true;
  bool validate_noise = false;

  std::optional<std::string> noise_path;  // pre-built noise sets; missing ones are synthesized
  std::optional<std::string> aux_scores;  // condition,pair,score CSV shown next to Fidelity
  std::optional<std::string> template_dir;
  std::string cache_dir;
  std::string output_dir;
  size_t concurrency = 4;

  /// Relative paths resolve against `base_dir`. Unknown keys are rejected.
  static RunConfig from_json(const json& j, const std::string& base_dir);
  static RunConfig load(const std::string& path);

  /// Referenced paths exist and every requested stage has its endpoint.
  /// Throws a config error otherwise.
  void validate() const;
};

/// http, or an offline double for mock/stub. `role` selects which double.
std::unique_ptr<gateway::ChatClient> make_chat_client(const gateway::EndpointConfig& config, std::string_view role,
                                                      const std::optional<std::string>& template_dir = std::nullopt);
std::unique_ptr<noise::SimilarityClient> make_similarity_client(const gateway::EndpointConfig& config);
std::unique_ptr<noise::NliClient> make_nli_client(const gateway::EndpointConfig& config);

/// Every configured source ingested, merged, and filtered to the configured pairs.
corpus::Dataset load_datasets(const RunConfig& config, json* rejects = nullptr);

struct RunSummary {
  std::string output_dir;
  std::vector<std::string> stages_run;
  std::vector<std::string> stages_reused;
  size_t client_calls = 0;
  size_t cache_hits = 0;
  size_t cache_misses = 0;
};

RunSummary run(const RunConfig& config);

// ---- reports -----------------------------------------------------------------

enum class ReportKind { kFidelityTable, kCarBars, kAttentionShares, kEntropyFidelity, kMitigationTable };
std::string_view to_string(ReportKind kind);
ReportKind parse_report_kind(std::string_view name);

struct ReportOptions {
  std::optional<std::string> out_dir;  // default <results>/reports
  std::vector<std::string> traces;     // default <results>/traces/*.jsonl
  std::optional<std::string> cells;    // condition,pair,fidelity[,comet] CSV instead of fidelity.jsonl
  std::optional<std::string> aux;      // condition,pair,score CSV
  std::string condition = "opposite";  // entropy_fidelity
  size_t concurrency = 4;
};

/// Writes <kind>.csv and <kind>.txt; returns their paths. A missing input is
/// a validation error naming it.
std::vector<std::string> report(const std::string& results_dir, ReportKind kind, const ReportOptions& options = {});

/// Mitigation strategies in table order with their directory names under
/// <results>/mitigation/.
const std::vector<std::pair<std::string, std::string>>& mitigation_strategies();

/// condition,pair,adopted,total,car_percent rows; pair "all" closes each condition.
std::string format_car_csv(const std::map<std::string, std::map<std::string, eval::CARRate>>& rates);
/// Conditions by pairs, CAR in percent.
std::string format_car_table(const std::map<std::string, std::map<std::string, eval::CARRate>>& rates);

/// Aligned plain-text table; first column left-aligned, the rest right-aligned.
std::string format_text_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

}  // namespace ctxnoise::pipeline
