// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxnoise/ckplug.hpp"

#include <cmath>

#include "ctxnoise/error.hpp"
#include "ctxnoise/jsonl.hpp"
#include "ctxnoise/text.hpp"

namespace ctxnoise::ckplug {

using gateway::TokenDistribution;
using nlohmann::json;

void BlendConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorKind::kConfig, "alpha must lie in [0, 1]");
}

std::string_view to_string(Branch b) { return b == Branch::kBlend ? "blend" : "suppress"; }

double confidence_gain(const TokenDistribution& p_context, const TokenDistribution& p_internal) {
  // Zero-filled entries on the union support add nothing to either entropy.
  return p_internal.entropy() - p_context.entropy();
}

BlendResult blend_detail(const TokenDistribution& p_context, const TokenDistribution& p_internal,
                         const BlendConfig& cfg) {
  cfg.validate();
  BlendResult r;
  r.h_internal = p_internal.entropy();
  r.h_context = p_context.entropy();
  r.cg = r.h_internal - r.h_context;
  if (!(r.cg > 0.0)) {
    r.branch = Branch::kSuppress;
    r.distribution = p_internal;
    return r;
  }
  r.branch = Branch::kBlend;
  std::map<std::string, double> mix;
  for (const auto& [tok, p] : p_context.entries()) mix[tok] += cfg.alpha * p;
  for (const auto& [tok, p] : p_internal.entries()) mix[tok] += (1.0 - cfg.alpha) * p;
  double sum = 0.0;
  for (const auto& [tok, p] : mix) sum += p;
  if (std::abs(sum - 1.0) > 1e-12) {
    for (auto& [tok, p] : mix) p /= sum;
  }
  r.distribution = TokenDistribution(std::move(mix));
  return r;
}

TokenDistribution blend_step(const TokenDistribution& p_context, const TokenDistribution& p_internal,
                             const BlendConfig& cfg) {
  return blend_detail(p_context, p_internal, cfg).distribution;
}

json StepLog::to_json() const {
  return json{{"step", step},          {"cg", cg},
              {"branch", std::string(to_string(branch))}, {"token", token},
              {"h_internal", h_internal}, {"h_context", h_context}};
}

namespace {

gateway::TranslationRecord base_record(const gateway::StepModel& model, const json& inputs,
                                       const gateway::DecodeParams& params) {
  if (!params.greedy) fail(ErrorKind::kConfig, "step decoding is greedy only");
  if (params.max_tokens <= 0) fail(ErrorKind::kConfig, "max_tokens must be positive");
  gateway::TranslationRecord rec;
  rec.model_id = model.model_id();
  rec.params = params;
  rec.cache_key = text::sha256_hex(json{{"model", rec.model_id}, {"inputs", inputs}, {"params", params.to_json()}}.dump());
  return rec;
}

void finish(DecodeResult& out, const gateway::StepModel& model) {
  out.record.output_translation = model.detokenize(out.tokens);
  json raw = json::array();
  for (const auto& s : out.steps) raw.push_back(s.to_json());
  out.record.raw_response = raw.dump();
}

}  // namespace

DecodeResult decode_with_ckplug(gateway::StepModel& model, const gateway::DualPrompt& prompts,
                                const gateway::DecodeParams& params, const BlendConfig& cfg) {
  cfg.validate();
  DecodeResult out;
  out.record = base_record(
      model, json{{"with_context", prompts.with_context}, {"without_context", prompts.without_context}, {"alpha", cfg.alpha}},
      params);
  const std::string end = model.end_token();
  try {
    for (int step = 0; step < params.max_tokens; ++step) {
      const auto p_ctx = gateway::next_token_distribution(model, out.tokens, prompts, gateway::PromptVariant::kWithContext);
      const auto p_int =
          gateway::next_token_distribution(model, out.tokens, prompts, gateway::PromptVariant::kWithoutContext);
      const auto b = blend_detail(p_ctx, p_int, cfg);
      StepLog log{static_cast<size_t>(step), b.cg, b.branch, b.distribution.argmax(), b.h_internal, b.h_context};
      out.steps.push_back(log);
      if (log.token == end) break;
      out.tokens.push_back(log.token);
    }
  } catch (const Error&) {
    out.record.partial = true;
  }
  finish(out, model);
  return out;
}

DecodeResult decode_greedy(gateway::StepModel& model, const std::string& prompt, const gateway::DecodeParams& params) {
  DecodeResult out;
  out.record = base_record(model, json{{"prompt", prompt}}, params);
  const std::string end = model.end_token();
  try {
    for (int step = 0; step < params.max_tokens; ++step) {
      const auto p = model.next_distribution(prompt, out.tokens);
      const double h = p.entropy();
      StepLog log{static_cast<size_t>(step), 0.0, Branch::kSuppress, p.argmax(), h, h};
      out.steps.push_back(log);
      if (log.token == end) break;
      out.tokens.push_back(log.token);
    }
  } catch (const Error&) {
    out.record.partial = true;
  }
  finish(out, model);
  return out;
}

void write_step_logs(const std::string& path, const std::vector<StepLog>& steps) {
  std::vector<json> rows;
  rows.reserve(steps.size());
  for (const auto& s : steps) rows.push_back(s.to_json());
  jsonl::write(path, rows);
}

}  // namespace ctxnoise::ckplug
