// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// Controlled noise meanings for an idiom instance and their validation.
//
// Four noisy meanings replace the gold meaning in the retrieval context:
//   struct   - the gold meaning with its word order/syntax perturbed
//   literal  - a word-by-word rendering of the idiom
//   semantic - the literal rendering nudged to an unrelated sense
//   opposite - a meaning that contradicts the gold meaning

#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctxnoise/client.hpp"
#include "ctxnoise/corpus.hpp"

namespace ctxnoise::noise {

enum class NoiseKind { kStruct, kLiteral, kSemantic, kOpposite };

inline constexpr std::array<NoiseKind, 4> kAllKinds = {NoiseKind::kStruct, NoiseKind::kLiteral, NoiseKind::kSemantic,
                                                       NoiseKind::kOpposite};

std::string_view to_string(NoiseKind kind);
NoiseKind parse_kind(std::string_view name);

/// Knowledge-level kinds: literal, semantic, opposite. These must differ from
/// the gold meaning; struct may legitimately coincide with it.
bool is_semantic(NoiseKind kind);

struct NoiseSet {
  std::string instance_id;
  std::map<NoiseKind, std::string> meanings;
  std::string generator_id;
  std::string prompt_hash;

  bool complete() const { return meanings.size() == kAllKinds.size(); }
  const std::string& at(NoiseKind kind) const;
};

/// Keyed by instance id.
using NoiseSets = std::map<std::string, NoiseSet, std::less<>>;

nlohmann::json to_json(const NoiseSet& set);
NoiseSet noise_set_from_json(const nlohmann::json& j);

/// Checks completeness and that no knowledge-level meaning equals the gold
/// meaning (case-folded). Throws a validation error naming the instance.
void check_invariants(const NoiseSet& set, const corpus::IdiomInstance& instance);

void write_jsonl(const std::string& path, const NoiseSets& sets);
NoiseSets load_jsonl(const std::string& path);

/// English names for the ISO codes used in prompts ("fi" -> "Finnish").
std::string language_name(std::string_view iso);

struct NoiseTemplates {
  std::map<NoiseKind, std::string> by_kind;

  /// noise_<kind>.txt from `dir` when present, shipped text otherwise.
  static NoiseTemplates load(const std::optional<std::string>& dir = std::nullopt);
  std::string digest() const;
};

struct SynthOptions {
  int max_attempts = 3;
  double temperature = 1.0;
  int max_tokens = 64;
  /// ISO code of the language the meanings are written in. Empty: the pair's
  /// target language.
  std::string meaning_language;
  size_t concurrency = 4;
};

/// One noisy meaning for `kind`. Regenerates empty outputs and, for
/// knowledge-level kinds, outputs equal to the gold meaning.
std::string synthesize_noise(const corpus::IdiomInstance& instance, NoiseKind kind, gateway::ChatClient& generator,
                             gateway::ResponseCache& cache, const NoiseTemplates& templates,
                             const SynthOptions& options = {});

NoiseSet synthesize_set(const corpus::IdiomInstance& instance, gateway::ChatClient& generator,
                        gateway::ResponseCache& cache, const NoiseTemplates& templates,
                        const SynthOptions& options = {});

/// Sets for every instance, keeping any already present in `existing`.
NoiseSets synthesize_all(const corpus::Dataset& dataset, gateway::ChatClient& generator,
                         gateway::ResponseCache& cache, const NoiseTemplates& templates,
                         const SynthOptions& options = {}, const NoiseSets& existing = {});

/// Cleans a raw generation: first non-empty line, trimmed, outer quotes removed.
std::string clean_generation(std::string_view raw);

// ---- scoring clients -------------------------------------------------------

class SimilarityClient {
 public:
  virtual ~SimilarityClient() = default;
  /// Cosine similarity of two texts.
  virtual double similarity(const std::string& a, const std::string& b) = 0;
};

enum class NliLabel { kEntailment, kNeutral, kContradiction };

std::string_view to_string(NliLabel label);
NliLabel parse_nli_label(std::string_view name);

class NliClient {
 public:
  virtual ~NliClient() = default;
  /// Class scores (probabilities or logits) for premise -> hypothesis.
  virtual std::map<NliLabel, double> classify(const std::string& premise, const std::string& hypothesis) = 0;
};

/// Argmax over class scores; ties resolve entailment < neutral < contradiction
/// in that preference order.
NliLabel argmax_label(const std::map<NliLabel, double>& scores);

/// OpenAI-style embeddings endpoint: POST {base_url}/embeddings.
class HttpEmbeddingSimilarity final : public SimilarityClient {
 public:
  explicit HttpEmbeddingSimilarity(gateway::EndpointConfig config) : config_(std::move(config)) {}
  double similarity(const std::string& a, const std::string& b) override;

 private:
  gateway::EndpointConfig config_;
};

/// POST {base_url} with {"premise","hypothesis"}; expects either
/// {"scores": {"entailment": p, "neutral": p, "contradiction": p}} or {"label": "..."}.
class HttpNliClient final : public NliClient {
 public:
  explicit HttpNliClient(gateway::EndpointConfig config) : config_(std::move(config)) {}
  std::map<NliLabel, double> classify(const std::string& premise, const std::string& hypothesis) override;

 private:
  gateway::EndpointConfig config_;
};

/// Offline stand-in: cosine of case-folded bag-of-words count vectors.
class BagOfWordsSimilarity final : public SimilarityClient {
 public:
  double similarity(const std::string& a, const std::string& b) override;
};

/// Offline stand-in: entailment for equal texts, contradiction for texts with
/// no shared token, neutral otherwise.
class LexicalNli final : public NliClient {
 public:
  std::map<NliLabel, double> classify(const std::string& premise, const std::string& hypothesis) override;
};

/// Scripted doubles for tests and fixtures.
class FunctionSimilarity final : public SimilarityClient {
 public:
  explicit FunctionSimilarity(std::function<double(const std::string&, const std::string&)> fn) : fn_(std::move(fn)) {}
  double similarity(const std::string& a, const std::string& b) override { return fn_(a, b); }

 private:
  std::function<double(const std::string&, const std::string&)> fn_;
};

class FunctionNli final : public NliClient {
 public:
  explicit FunctionNli(std::function<NliLabel(const std::string&, const std::string&)> fn) : fn_(std::move(fn)) {}
  std::map<NliLabel, double> classify(const std::string& premise, const std::string& hypothesis) override {
    return {{fn_(premise, hypothesis), 1.0}};
  }

 private:
  std::function<NliLabel(const std::string&, const std::string&)> fn_;
};

// ---- validation ------------------------------------------------------------

struct ValidationStats {
  double ter_struct = 0.0;            // mean TER(G, N_struct), percent
  double sim_g_struct = 0.0;          // mean cos(G, N_struct)
  double sim_g_literal = 0.0;         // mean cos(G, N_literal)
  double sim_literal_semantic = 0.0;  // mean cos(N_literal, N_semantic)
  double sim_g_semantic = 0.0;        // mean cos(G, N_semantic)
  double cr_opposite = 0.0;           // contradiction count / pair count
  size_t instances = 0;
  size_t contradictions = 0;
};

struct NoiseValidationReport {
  ValidationStats overall;
  std::map<std::string, ValidationStats> per_pair;  // keyed by pair key, e.g. "fi-en"
  size_t clamped_similarities = 0;                  // client values outside [-1, 1]
  size_t inexact_ter = 0;                           // TER search budget exhausted

  nlohmann::json to_json() const;
  std::string to_table() const;
};

struct ValidateOptions {
  size_t concurrency = 4;
};

NoiseValidationReport validate_noise(const corpus::Dataset& dataset, const NoiseSets& noise,
                                     SimilarityClient& sim_client, NliClient& nli_client,
                                     const ValidateOptions& options = {});

/// Offline generator double. Reads request.vars {kind, idiom, gold_meaning}:
/// struct reverses the gold meaning's words, literal is "literally <idiom>",
/// semantic is "literally <idiom> elsewhere", opposite is "not <gold>".
class OfflineNoiseGenerator final : public gateway::ChatClient {
 public:
  gateway::ChatResponse complete(const gateway::ChatRequest& request) override;
  std::string model_id() const override { return "offline-noise-generator"; }
  size_t calls() const override { return calls_; }

 private:
  std::atomic<size_t> calls_{0};
};

}  // namespace ctxnoise::noise
