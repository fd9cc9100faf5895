// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// Analysis of trace/v1 generation traces: where the attention of each target
// token went (idiom, context, other), the target span that translates the
// idiom, and how confident the model was over that span.

#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ctxnoise::trace {

inline constexpr std::string_view kSchema = "trace/v1";
inline constexpr double kShareTolerance = 1e-4;

enum class Role { kIdiom = 0, kContext = 1, kOther = 2 };
std::string_view to_string(Role r);
Role parse_role(std::string_view name);

struct Segment {
  Role role = Role::kOther;
  size_t start = 0;
  size_t end = 0;  // exclusive
};

struct TargetToken {
  std::string token;
  double entropy_nats = 0.0;
  std::array<double, 3> share{};  // indexed by Role

  double operator[](Role r) const { return share[static_cast<size_t>(r)]; }
};

struct Trace {
  std::string instance_id;
  std::string condition;
  std::string model_id;
  std::vector<Segment> segments;
  std::vector<TargetToken> tokens;
};

/// Validates every trace/v1 invariant; messages are prefixed with `where`.
Trace parse_trace(const nlohmann::json& j, const std::string& where = "<trace>");
nlohmann::json to_json(const Trace& t);

/// One trace per line; diagnostics carry the file and line number.
std::vector<Trace> load_traces(const std::string& path);
std::vector<Trace> parse_traces(std::string_view data, const std::string& source = "<input>");

struct AttentionAllocation {
  double idiom_share = 0.0;
  double context_share = 0.0;
  double other_share = 0.0;
  size_t token_count = 0;
};

/// Per-role mean share over all target tokens.
AttentionAllocation attention_allocation(const Trace& trace);

struct Span {
  size_t begin = 0;
  size_t end = 0;  // exclusive
  size_t size() const { return end - begin; }
  bool empty() const { return end == begin; }
  bool operator==(const Span&) const = default;
};

/// Argmax role of a token's attention; ties prefer other, then context, then idiom.
Role label_token(const TargetToken& token);

struct SpanAlignment {
  Span span;
  bool empty = false;  // no idiom-labeled token
  std::vector<Role> labels;
};

/// Longest contiguous idiom-labeled run; the earliest wins among equal lengths.
SpanAlignment align_idiom_span(const Trace& trace);

struct SpanEntropyReport {
  Span span;
  double mean_entropy = 0.0;
  std::optional<int> fidelity;
};

SpanEntropyReport span_confidence(const Trace& trace, Span span);

struct TraceSummary {
  std::string instance_id;
  std::string condition;
  std::string model_id;
  AttentionAllocation allocation;
  SpanAlignment alignment;
  std::optional<SpanEntropyReport> confidence;  // absent for an empty span

  nlohmann::json to_json() const;
};

/// Fidelity scores keyed by (instance_id, condition), paired into the span reports.
using FidelityIndex = std::map<std::pair<std::string, std::string>, int>;

std::vector<TraceSummary> analyze(const std::vector<Trace>& traces, const FidelityIndex& fidelity = {},
                                  size_t concurrency = 4);

/// Mean of per-trace allocations for each condition.
std::map<std::string, AttentionAllocation> allocation_by_condition(const std::vector<TraceSummary>& summaries);

struct EntropyByFidelity {
  int fidelity = 0;
  double mean_entropy = 0.0;
  size_t spans = 0;
};

/// Mean span entropy grouped by the paired fidelity score, for one condition.
std::vector<EntropyByFidelity> entropy_by_fidelity(const std::vector<TraceSummary>& summaries,
                                                   const std::string& condition);

std::string format_allocation_table(const std::map<std::string, AttentionAllocation>& by_condition);
std::string format_entropy_table(const std::vector<EntropyByFidelity>& rows);

}  // namespace ctxnoise::trace
