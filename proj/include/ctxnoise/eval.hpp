// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// Judge-based scoring (Fidelity, context adoption), aggregation into
// condition x pair tables, and agreement with human ratings.

#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctxnoise/client.hpp"
#include "ctxnoise/conditions.hpp"
#include "ctxnoise/corpus.hpp"
#include "ctxnoise/gateway.hpp"
#include "ctxnoise/numerics.hpp"

namespace ctxnoise::eval {

using nlohmann::json;

struct JudgeOptions {
  int runs = 20;
  double temperature = 1.0;
  int max_tokens = 16;
  int max_resamples = 3;               // extra attempts per run after an unparseable answer
  double max_unparseable_fraction = 0.25;
  bool include_reference = false;
  double car_temperature = 0.0;        // 0 means greedy
  size_t concurrency = 4;
  std::optional<std::string> template_dir;
};

struct FidelityJudgement {
  std::string instance_id;
  std::string condition;
  std::string pair_key;
  std::array<int, 4> votes{};
  int score = 0;
  bool valid = true;
  int calls = 0;
  int unparseable = 0;

  json to_json() const;
  static FidelityJudgement from_json(const json& j);
};

struct CARJudgement {
  std::string instance_id;
  std::string condition;
  std::string pair_key;
  int adopted = 0;
  bool in_output = false;
  bool in_baseline = false;
  bool valid = true;
  std::string judge_rationale;  // raw judge answers

  json to_json() const;
  static CARJudgement from_json(const json& j);
};

/// The first standalone integer in the text, if it lies in [0, 3].
std::optional<int> parse_rating(const std::string& answer);
/// A leading or sole standalone yes/no.
std::optional<bool> parse_yes_no(const std::string& answer);

/// Mode of the histogram; ties go to the lower rating.
int mode_score(const std::array<int, 4>& votes);

FidelityJudgement judge_fidelity(const std::string& y, const std::string& m, gateway::ChatClient& judge,
                                 gateway::ResponseCache& cache, const JudgeOptions& options = {},
                                 const std::optional<std::string>& reference = std::nullopt);

/// adopted = 1 iff the judge finds `context_text` in `y` and not in
/// `y_no_context`. A missing baseline is a validation error.
CARJudgement judge_car(const std::string& y, const std::optional<std::string>& y_no_context,
                       const std::string& context_text, gateway::ChatClient& judge, gateway::ResponseCache& cache,
                       const JudgeOptions& options = {});

/// Fidelity for every record against its instance's gold meaning.
std::vector<FidelityJudgement> judge_fidelity_all(const std::vector<gateway::TranslationRecord>& records,
                                                  const corpus::Dataset& dataset, gateway::ChatClient& judge,
                                                  gateway::ResponseCache& cache, const JudgeOptions& options = {});

/// CAR for every record with a context, against the none record of the same
/// instance. Context texts come from the tasks.
std::vector<CARJudgement> judge_car_all(const std::vector<gateway::TranslationRecord>& records,
                                        const std::vector<conditions::TranslationTask>& tasks,
                                        gateway::ChatClient& judge, gateway::ResponseCache& cache,
                                        const JudgeOptions& options = {});

/// Offline judge double. Fidelity: 3 when the case-folded translation
/// contains the meaning, 1 when they share a token, 0 otherwise. CAR: "yes"
/// iff the translation contains the meaning. Reads request.vars.
class StubJudge final : public gateway::ChatClient {
 public:
  gateway::ChatResponse complete(const gateway::ChatRequest& request) override;
  std::string model_id() const override { return "stub-judge"; }
  size_t calls() const override { return calls_; }

 private:
  std::atomic<size_t> calls_{0};
};

/// Answers with a caller-supplied function.
class FunctionJudge final : public gateway::ChatClient {
 public:
  explicit FunctionJudge(std::function<std::string(const gateway::ChatRequest&)> fn) : fn_(std::move(fn)) {}
  gateway::ChatResponse complete(const gateway::ChatRequest& request) override;
  std::string model_id() const override { return "function-judge"; }
  size_t calls() const override { return calls_; }

 private:
  std::function<std::string(const gateway::ChatRequest&)> fn_;
  std::atomic<size_t> calls_{0};
};

// ---- aggregation -------------------------------------------------------------

/// Half-up rounding to `decimals` places for display.
double round_half_up(double x, int decimals = 1);

struct AggregateRow {
  std::string condition;
  std::map<std::string, double> fidelity;  // pair key -> mean
  std::map<std::string, double> aux;       // pair key -> externally supplied score
  std::optional<double> avg_f;
  std::optional<double> avg_c;
  std::map<std::string, size_t> counts;    // judgements behind each fidelity cell
};

/// Keyed by (condition, pair key).
using CellScores = std::map<std::pair<std::string, std::string>, double>;

AggregateRow make_row(const std::string& condition, std::map<std::string, double> fidelity,
                      std::map<std::string, double> aux);

/// Per-pair mean fidelity per condition over valid judgements. Rows follow
/// the canonical condition order; conditions with no cells are omitted.
std::vector<AggregateRow> aggregate(const std::vector<FidelityJudgement>& judgements, const CellScores& aux = {});

/// Rows straight from per-cell values, e.g. a results table typed in by hand.
std::vector<AggregateRow> aggregate_cells(const CellScores& fidelity, const CellScores& aux);

/// CSV with columns condition,pair,fidelity[,comet]; empty cells are absent.
void load_cell_table(const std::string& path, CellScores& fidelity, CellScores& aux);
/// CSV with columns condition,pair,score.
CellScores load_aux_scores(const std::string& path);

/// Column order: the canonical ten pairs first, then others by name.
std::vector<std::string> pair_columns(const std::vector<AggregateRow>& rows);
std::string format_table(const std::vector<AggregateRow>& rows);
std::string format_csv(const std::vector<AggregateRow>& rows);

struct CARRate {
  size_t adopted = 0;
  size_t total = 0;
  double rate() const { return total == 0 ? 0.0 : static_cast<double>(adopted) / static_cast<double>(total); }
};

/// condition -> pair key -> rate; pair key "all" holds the condition total.
std::map<std::string, std::map<std::string, CARRate>> car_rates(const std::vector<CARJudgement>& judgements);

// ---- human agreement ---------------------------------------------------------

/// CSV (item_id, annotator_id, rating 0-3) averaged per item.
std::map<std::string, double> load_human_ratings(const std::string& path);
std::map<std::string, double> parse_human_ratings(const std::string& csv_text, const std::string& source = "<input>");

/// Pearson, Spearman and Kendall tau-b over the shared item ids; the id sets
/// must match exactly.
numerics::Correlations correlate_with_humans(const std::map<std::string, double>& automatic,
                                             const std::map<std::string, double>& human);

struct CorrelationRow {
  std::string metric;
  std::string pair_key;
  numerics::Correlations values;
  size_t items = 0;
};

std::string format_correlations(const std::vector<CorrelationRow>& rows);

template <typename T>
void write_jsonl(const std::string& path, const std::vector<T>& items);
std::vector<FidelityJudgement> load_fidelity(const std::string& path);
std::vector<CARJudgement> load_car(const std::string& path);

}  // namespace ctxnoise::eval
