// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// Translation records, step-wise token distributions, and the offline model
// doubles (MockTranslator, ToyLM) used to drive the pipeline without a network.

#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "ctxnoise/client.hpp"
#include "ctxnoise/conditions.hpp"

namespace ctxnoise::gateway {

struct TranslationRecord {
  std::string instance_id;
  std::string condition;
  std::string pair_key;
  std::string model_id;
  DecodeParams params;
  std::string output_translation;
  std::string reasoning;  // response text outside the delimiters
  std::string raw_response;
  std::string cache_key;
  std::string timestamp;
  bool unparsed = false;  // no delimiter pair; output_translation holds the trimmed response
  bool partial = false;   // decode stopped on a model failure
  bool cache_hit = false;  // not persisted

  json to_json() const;
  static TranslationRecord from_json(const json& j);
};

struct Extraction {
  std::string translation;
  std::string reasoning;
  bool parsed = false;
};

/// Takes the last complete <translation>...</translation> pair. Everything
/// outside it is reasoning.
Extraction extract_translation(const std::string& content);

/// One translation through the cache.
TranslationRecord translate(const conditions::TranslationTask& task, const DecodeParams& params, ChatClient& client,
                            ResponseCache& cache);

void write_records(const std::string& path, const std::vector<TranslationRecord>& records);
std::vector<TranslationRecord> load_records(const std::string& path);

/// Deterministic translator double. With a context block carrying meaning M
/// the translation is "TR(<source>) with M"; without one it is
/// "TR(<source>) with LIT(<idiom>)". Source and idiom come from request.vars;
/// M is parsed out of the prompt using the context block template.
class MockTranslator final : public ChatClient {
 public:
  explicit MockTranslator(std::string context_block_template = {}, bool emit_reasoning = false,
                          bool emit_delimiters = true);
  ChatResponse complete(const ChatRequest& request) override;
  std::string model_id() const override { return "mock-translator"; }
  size_t calls() const override { return calls_; }

  static std::string translated(const std::string& source);
  static std::string literal(const std::string& idiom);

 private:
  std::regex context_re_;
  bool emit_reasoning_;
  bool emit_delimiters_;
  std::atomic<size_t> calls_{0};
};

// ---- token distributions ---------------------------------------------------

class TokenDistribution {
 public:
  TokenDistribution() = default;
  /// Validates non-negative entries summing to 1 within 1e-9.
  explicit TokenDistribution(std::map<std::string, double> entries);

  const std::map<std::string, double>& entries() const { return entries_; }
  double prob(const std::string& token) const;
  /// Highest probability; ties go to the lexicographically first token.
  const std::string& argmax() const;
  double entropy() const;  // nats
  size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, double> entries_;
};

struct TruncatedDistribution {
  TokenDistribution distribution;
  double tail_mass = 0.0;  // probability outside the kept tokens, before renormalizing
};

/// Keeps the k most probable entries (ties by token order) and renormalizes.
/// `probs` may be a partial distribution (API top-k); its missing mass counts
/// toward the tail.
TruncatedDistribution renormalize_top_k(const std::map<std::string, double>& probs, size_t k);

/// From (token, logprob) alternatives; duplicates are summed.
TruncatedDistribution from_logprobs(const std::vector<std::pair<std::string, double>>& alternatives, size_t k);

/// A model that exposes its next-token distribution for a prompt plus an
/// already emitted prefix.
class StepModel {
 public:
  virtual ~StepModel() = default;
  virtual TokenDistribution next_distribution(const std::string& prompt, const std::vector<std::string>& prefix) = 0;
  virtual std::string end_token() const = 0;
  virtual std::string model_id() const = 0;
  /// Surface text for emitted tokens.
  virtual std::string detokenize(const std::vector<std::string>& tokens) const;
};

enum class PromptVariant { kWithContext, kWithoutContext };

struct DualPrompt {
  std::string with_context;
  std::string without_context;
  const std::string& operator[](PromptVariant v) const {
    return v == PromptVariant::kWithContext ? with_context : without_context;
  }
};

TokenDistribution next_token_distribution(StepModel& model, const std::vector<std::string>& prefix,
                                          const DualPrompt& prompts, PromptVariant variant);

/// Eight-token bigram model read from a JSON fixture:
///   {"vocab": [...8 tokens...], "end_token": "...", "context_marker": "...",
///    "base": {prev: {token: p}}, "context": {prev: {token: p}}}
/// `prev` is the last emitted token or "<s>" at step 0. A prompt containing
/// context_marker uses "context" (falling back to "base" for missing rows).
class ToyLM final : public StepModel {
 public:
  static ToyLM from_json(const json& j);
  static ToyLM load(const std::string& path);

  TokenDistribution next_distribution(const std::string& prompt, const std::vector<std::string>& prefix) override;
  std::string end_token() const override { return end_token_; }
  std::string model_id() const override { return "toylm"; }

  const std::vector<std::string>& vocab() const { return vocab_; }
  const std::string& context_marker() const { return context_marker_; }
  const TokenDistribution& row(bool with_context, const std::string& prev) const;

 private:
  std::vector<std::string> vocab_;
  std::string end_token_;
  std::string context_marker_;
  std::map<std::string, TokenDistribution> base_;
  std::map<std::string, TokenDistribution> context_;
};

/// Open completions endpoint with per-token logprobs: one max_tokens=1 greedy
/// request per step, the prefix concatenated onto the prompt. The returned
/// distribution is the renormalized top-k; last_tail_mass() reports what was cut.
class CompletionsStepModel final : public StepModel {
 public:
  CompletionsStepModel(EndpointConfig config, size_t top_k = 20, std::string end_token = "<|endoftext|>");
  TokenDistribution next_distribution(const std::string& prompt, const std::vector<std::string>& prefix) override;
  std::string end_token() const override { return end_token_; }
  std::string model_id() const override { return config_.model_id; }
  std::string detokenize(const std::vector<std::string>& tokens) const override;
  double last_tail_mass() const { return last_tail_mass_; }

 private:
  EndpointConfig config_;
  size_t top_k_;
  std::string end_token_;
  std::atomic<double> last_tail_mass_{0.0};
};

}  // namespace ctxnoise::gateway
