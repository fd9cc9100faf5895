// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// Entropy-gated blending of context-aware and internal next-token
// distributions. CG = H(internal) - H(context); when CG > 0 the step uses
// alpha * p_context + (1 - alpha) * p_internal, otherwise p_internal alone.

#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>
#include <vector>

#include "ctxnoise/gateway.hpp"

namespace ctxnoise::ckplug {

struct BlendConfig {
  double alpha = 0.5;
  void validate() const;
};

enum class Branch { kBlend, kSuppress };
std::string_view to_string(Branch b);

/// In nats. Positive when the context makes the model more certain.
double confidence_gain(const gateway::TokenDistribution& p_context, const gateway::TokenDistribution& p_internal);

struct BlendResult {
  gateway::TokenDistribution distribution;
  Branch branch = Branch::kSuppress;
  double cg = 0.0;
  double h_internal = 0.0;
  double h_context = 0.0;
};

BlendResult blend_detail(const gateway::TokenDistribution& p_context, const gateway::TokenDistribution& p_internal,
                         const BlendConfig& cfg);

gateway::TokenDistribution blend_step(const gateway::TokenDistribution& p_context,
                                      const gateway::TokenDistribution& p_internal, const BlendConfig& cfg);

struct StepLog {
  size_t step = 0;
  double cg = 0.0;
  Branch branch = Branch::kSuppress;
  std::string token;
  double h_internal = 0.0;
  double h_context = 0.0;

  nlohmann::json to_json() const;
};

struct DecodeResult {
  gateway::TranslationRecord record;
  std::vector<std::string> tokens;  // emitted tokens, end token excluded
  std::vector<StepLog> steps;
};

/// Greedy decode. Each step queries both prompt variants with the shared
/// emitted prefix, blends, and emits the argmax. Stops at the end token or
/// params.max_tokens. A model failure mid-decode marks the record partial
/// and keeps the logs gathered so far.
DecodeResult decode_with_ckplug(gateway::StepModel& model, const gateway::DualPrompt& prompts,
                                const gateway::DecodeParams& params, const BlendConfig& cfg);

/// Plain greedy decode of a single prompt; the baseline CK-PLUG is compared to.
DecodeResult decode_greedy(gateway::StepModel& model, const std::string& prompt, const gateway::DecodeParams& params);

void write_step_logs(const std::string& path, const std::vector<StepLog>& steps);

}  // namespace ctxnoise::ckplug
