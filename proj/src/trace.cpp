// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxnoise/trace.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "ctxnoise/conditions.hpp"
#include "ctxnoise/error.hpp"
#include "ctxnoise/jsonl.hpp"
#include "ctxnoise/parallel.hpp"
#include "ctxnoise/text.hpp"

namespace ctxnoise::trace {

using nlohmann::json;

namespace {

constexpr std::array<Role, 3> kRoles = {Role::kIdiom, Role::kContext, Role::kOther};

[[noreturn]] void invalid(const std::string& where, const std::string& msg) {
  fail(ErrorKind::kValidation, where + ": " + msg);
}

size_t condition_rank(const std::string& name) {
  for (size_t i = 0; i < conditions::kAllConditions.size(); ++i) {
    if (conditions::to_string(conditions::kAllConditions[i]) == name) return i;
  }
  return conditions::kAllConditions.size();
}

}  // namespace

std::string_view to_string(Role r) {
  switch (r) {
    case Role::kIdiom: return "idiom";
    case Role::kContext: return "context";
    case Role::kOther: return "other";
  }
  return "other";
}

Role parse_role(std::string_view name) {
  for (auto r : kRoles) {
    if (to_string(r) == name) return r;
  }
  fail(ErrorKind::kValidation, "unknown segment role: " + std::string(name));
}

Trace parse_trace(const json& j, const std::string& where) {
  if (!j.is_object()) invalid(where, "trace is not an object");
  if (!j.contains("schema") || j["schema"] != kSchema) invalid(where, "schema must be \"trace/v1\"");
  Trace t;
  auto str = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_string()) invalid(where, std::string("missing string field ") + key);
    return j[key].get<std::string>();
  };
  t.instance_id = str("instance_id");
  t.condition = str("condition");
  t.model_id = str("model_id");

  if (!j.contains("input_segments") || !j["input_segments"].is_array()) invalid(where, "missing input_segments");
  for (const auto& s : j["input_segments"]) {
    Segment seg;
    try {
      seg.role = parse_role(s.at("role").get<std::string>());
      const auto start = s.at("start").get<long long>();
      const auto end = s.at("end").get<long long>();
      if (start < 0 || end <= start) invalid(where, "segment range must satisfy 0 <= start < end");
      seg.start = static_cast<size_t>(start);
      seg.end = static_cast<size_t>(end);
    } catch (const json::exception& e) {
      invalid(where, std::string("bad input segment: ") + e.what());
    } catch (const Error& e) {
      if (std::string(e.what()).rfind(where, 0) == 0) throw;
      invalid(where, e.what());
    }
    t.segments.push_back(seg);
  }
  if (t.segments.empty()) invalid(where, "no input segments");
  auto sorted = t.segments;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  if (sorted.front().start != 0) invalid(where, "input segments do not start at 0");
  for (size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].start < sorted[i - 1].end) invalid(where, "input segments overlap");
    if (sorted[i].start > sorted[i - 1].end) invalid(where, "input segments leave a gap");
  }

  if (!j.contains("target_tokens") || !j["target_tokens"].is_array()) invalid(where, "missing target_tokens");
  size_t index = 0;
  for (const auto& tok : j["target_tokens"]) {
    const std::string at = where + ": target token " + std::to_string(index++);
    TargetToken tt;
    try {
      tt.token = tok.at("token").get<std::string>();
      tt.entropy_nats = tok.at("entropy_nats").get<double>();
      const auto& share = tok.at("attn_share");
      for (auto r : kRoles) tt.share[static_cast<size_t>(r)] = share.at(std::string(to_string(r))).get<double>();
    } catch (const json::exception& e) {
      fail(ErrorKind::kValidation, at + ": " + e.what());
    }
    if (!std::isfinite(tt.entropy_nats) || tt.entropy_nats < 0.0) {
      fail(ErrorKind::kValidation, at + ": entropy must be finite and >= 0");
    }
    double sum = 0.0;
    for (double v : tt.share) {
      if (!std::isfinite(v) || v < 0.0) fail(ErrorKind::kValidation, at + ": attention shares must be >= 0");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kShareTolerance) {
      fail(ErrorKind::kValidation, at + ": attention shares sum to " + std::to_string(sum));
    }
    t.tokens.push_back(std::move(tt));
  }
  return t;
}

json to_json(const Trace& t) {
  json segs = json::array();
  for (const auto& s : t.segments) segs.push_back({{"role", std::string(to_string(s.role))}, {"start", s.start}, {"end", s.end}});
  json toks = json::array();
  for (const auto& tok : t.tokens) {
    toks.push_back({{"token", tok.token},
                    {"entropy_nats", tok.entropy_nats},
                    {"attn_share", {{"idiom", tok[Role::kIdiom]}, {"context", tok[Role::kContext]}, {"other", tok[Role::kOther]}}}});
  }
  return json{{"schema", std::string(kSchema)}, {"instance_id", t.instance_id}, {"condition", t.condition},
              {"model_id", t.model_id},          {"input_segments", segs},      {"target_tokens", toks}};
}

std::vector<Trace> parse_traces(std::string_view data, const std::string& source) {
  std::vector<Trace> out;
  for (const auto& line : jsonl::parse(data, source)) {
    out.push_back(parse_trace(line.value, source + ":" + std::to_string(line.number)));
  }
  return out;
}

std::vector<Trace> load_traces(const std::string& path) { return parse_traces(text::read_file(path), path); }

AttentionAllocation attention_allocation(const Trace& trace) {
  if (trace.tokens.empty()) {
    fail(ErrorKind::kValidation, "trace " + trace.instance_id + "/" + trace.condition + " has no target tokens");
  }
  AttentionAllocation a;
  for (const auto& t : trace.tokens) {
    a.idiom_share += t[Role::kIdiom];
    a.context_share += t[Role::kContext];
    a.other_share += t[Role::kOther];
  }
  const double n = static_cast<double>(trace.tokens.size());
  a.idiom_share /= n;
  a.context_share /= n;
  a.other_share /= n;
  a.token_count = trace.tokens.size();
  return a;
}

Role label_token(const TargetToken& token) {
  // Scan in tie preference order so equal shares keep the earlier role.
  Role best = Role::kOther;
  for (auto r : {Role::kContext, Role::kIdiom}) {
    if (token[r] > token[best]) best = r;
  }
  return best;
}

SpanAlignment align_idiom_span(const Trace& trace) {
  SpanAlignment out;
  out.labels.reserve(trace.tokens.size());
  for (const auto& t : trace.tokens) out.labels.push_back(label_token(t));
  size_t i = 0;
  while (i < out.labels.size()) {
    if (out.labels[i] != Role::kIdiom) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < out.labels.size() && out.labels[j] == Role::kIdiom) ++j;
    if (j - i > out.span.size()) out.span = {i, j};
    i = j;
  }
  out.empty = out.span.empty();
  return out;
}

SpanEntropyReport span_confidence(const Trace& trace, Span span) {
  if (span.empty()) fail(ErrorKind::kValidation, "span confidence needs a non-empty span");
  if (span.end > trace.tokens.size() || span.begin > span.end) {
    fail(ErrorKind::kValidation, "span lies outside the target sequence");
  }
  double sum = 0.0;
  for (size_t i = span.begin; i < span.end; ++i) sum += trace.tokens[i].entropy_nats;
  SpanEntropyReport r;
  r.span = span;
  r.mean_entropy = sum / static_cast<double>(span.size());
  return r;
}

json TraceSummary::to_json() const {
  json j{{"instance_id", instance_id},
         {"condition", condition},
         {"model_id", model_id},
         {"allocation",
          {{"idiom", allocation.idiom_share},
           {"context", allocation.context_share},
           {"other", allocation.other_share},
           {"tokens", allocation.token_count}}},
         {"span", {alignment.span.begin, alignment.span.end}},
         {"span_empty", alignment.empty}};
  if (confidence) {
    j["span_mean_entropy"] = confidence->mean_entropy;
    j["fidelity"] = confidence->fidelity ? json(*confidence->fidelity) : json(nullptr);
  }
  return j;
}

std::vector<TraceSummary> analyze(const std::vector<Trace>& traces, const FidelityIndex& fidelity,
                                  size_t concurrency) {
  std::vector<TraceSummary> out(traces.size());
  parallel_for(traces.size(), concurrency, [&](size_t i) {
    const auto& t = traces[i];
    TraceSummary s;
    s.instance_id = t.instance_id;
    s.condition = t.condition;
    s.model_id = t.model_id;
    s.allocation = attention_allocation(t);
    s.alignment = align_idiom_span(t);
    if (!s.alignment.empty) {
      s.confidence = span_confidence(t, s.alignment.span);
      if (auto it = fidelity.find({t.instance_id, t.condition}); it != fidelity.end()) {
        s.confidence->fidelity = it->second;
      }
    }
    out[i] = std::move(s);
  });
  return out;
}

std::map<std::string, AttentionAllocation> allocation_by_condition(const std::vector<TraceSummary>& summaries) {
  std::map<std::string, std::pair<AttentionAllocation, size_t>> acc;
  for (const auto& s : summaries) {
    auto& [a, n] = acc[s.condition];
    a.idiom_share += s.allocation.idiom_share;
    a.context_share += s.allocation.context_share;
    a.other_share += s.allocation.other_share;
    a.token_count += s.allocation.token_count;
    ++n;
  }
  std::map<std::string, AttentionAllocation> out;
  for (auto& [c, p] : acc) {
    auto a = p.first;
    const double n = static_cast<double>(p.second);
    a.idiom_share /= n;
    a.context_share /= n;
    a.other_share /= n;
    out[c] = a;
  }
  return out;
}

std::vector<EntropyByFidelity> entropy_by_fidelity(const std::vector<TraceSummary>& summaries,
                                                   const std::string& condition) {
  std::map<int, std::pair<double, size_t>> acc;
  for (const auto& s : summaries) {
    if (s.condition != condition || !s.confidence || !s.confidence->fidelity) continue;
    auto& [sum, n] = acc[*s.confidence->fidelity];
    sum += s.confidence->mean_entropy;
    ++n;
  }
  std::vector<EntropyByFidelity> out;
  for (const auto& [f, p] : acc) out.push_back({f, p.first / static_cast<double>(p.second), p.second});
  return out;
}

std::string format_allocation_table(const std::map<std::string, AttentionAllocation>& by_condition) {
  std::vector<std::string> names;
  for (const auto& [c, _] : by_condition) names.push_back(c);
  std::stable_sort(names.begin(), names.end(),
                   [](const auto& a, const auto& b) { return condition_rank(a) < condition_rank(b); });
  std::ostringstream out;
  out << std::left << std::setw(10) << "condition" << std::right << std::setw(9) << "idiom" << std::setw(9)
      << "context" << std::setw(9) << "other" << std::setw(8) << "tokens" << "\n"
      << std::fixed << std::setprecision(4);
  for (const auto& c : names) {
    const auto& a = by_condition.at(c);
    out << std::left << std::setw(10) << c << std::right << std::setw(9) << a.idiom_share << std::setw(9)
        << a.context_share << std::setw(9) << a.other_share << std::setw(8) << a.token_count << "\n";
  }
  return out.str();
}

std::string format_entropy_table(const std::vector<EntropyByFidelity>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "fidelity" << std::right << std::setw(14) << "mean entropy" << std::setw(8)
      << "spans" << "\n"
      << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    out << std::left << std::setw(10) << r.fidelity << std::right << std::setw(14) << r.mean_entropy << std::setw(8)
        << r.spans << "\n";
  }
  return out.str();
}

}  // namespace ctxnoise::trace
