// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// Canonical idiom-translation dataset: ingestion from heterogeneous CSV/TSV/
// JSONL sources, resource-tier tagging, and seeded per-pair sampling.

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ctxnoise::corpus {

enum class Tier { kHigh, kMedium, kLow };

std::string_view to_string(Tier tier);
Tier parse_tier(std::string_view name);

struct LanguagePair {
  std::string source_lang;  // ISO-639-1, lowercase
  std::string target_lang;
  Tier tier = Tier::kHigh;

  /// "fi-en"
  std::string key() const { return source_lang + "-" + target_lang; }
  /// "Fi→En"
  std::string label() const;

  friend bool operator==(const LanguagePair& a, const LanguagePair& b) {
    return a.source_lang == b.source_lang && a.target_lang == b.target_lang;
  }
};

struct IdiomInstance {
  std::string id;
  LanguagePair pair;
  std::string source_sentence;
  std::string idiom_surface;
  std::string gold_meaning;
  std::string reference_translation;
  std::string provenance;
};

nlohmann::json to_json(const IdiomInstance& inst);

/// Resource tiers keyed by "src-tgt". The built-in table covers the ten
/// evaluated directions; overrides replace or extend it.
class TierTable {
 public:
  static TierTable builtin();

  void set(std::string_view source_lang, std::string_view target_lang, Tier tier);
  /// {"fi-en": "medium", ...}
  void apply_overrides(const nlohmann::json& overrides);

  std::optional<Tier> find(std::string_view source_lang, std::string_view target_lang) const;
  /// Throws a validation error for an unknown pair.
  Tier tier_of(std::string_view source_lang, std::string_view target_lang) const;

  const std::map<std::string, Tier>& entries() const { return table_; }

 private:
  std::map<std::string, Tier> table_;
};

Tier tier_of(const LanguagePair& pair, const TierTable& table = TierTable::builtin());

struct Reject {
  size_t line = 0;
  std::string id;
  std::string reason;
};

class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<IdiomInstance> instances);

  const std::vector<IdiomInstance>& instances() const { return instances_; }
  size_t size() const { return instances_.size(); }
  bool empty() const { return instances_.empty(); }

  const IdiomInstance* find(std::string_view id) const;
  const IdiomInstance& at(std::string_view id) const;

  /// Distinct pairs in first-appearance order.
  std::vector<LanguagePair> pairs() const;

  std::vector<Reject> rejects;
  std::vector<std::string> warnings;

 private:
  std::vector<IdiomInstance> instances_;
  std::map<std::string, size_t, std::less<>> index_;
};

/// Source layout. Canonical field names: id, source_lang, target_lang, tier,
/// source_sentence, idiom_surface, gold_meaning, reference_translation,
/// provenance. `columns` maps a canonical field to the source column (header
/// name for CSV/TSV, key for JSONL); a value starting with '@' is a constant.
struct SourceFormat {
  enum class Kind { kJsonl, kCsv, kTsv };
  Kind kind = Kind::kJsonl;
  std::map<std::string, std::string> columns;

  /// "jsonl", "csv", "tsv", optionally followed by ":field=column,...",
  /// e.g. "tsv:idiom_surface=Idiom,source_lang=@fi,target_lang=@en".
  static SourceFormat parse(std::string_view descriptor);
};

Dataset ingest(const std::string& path, const SourceFormat& format, const TierTable& tiers = TierTable::builtin());
/// Same as ingest() on in-memory data; `provenance` fills rows lacking one.
Dataset ingest_text(std::string_view data, const SourceFormat& format, std::string_view provenance,
                    const TierTable& tiers = TierTable::builtin());

/// Up to n instances per language pair by a seeded draw. Output is grouped
/// by pair in first-appearance order, dataset order within a pair.
Dataset sample(const Dataset& dataset, size_t n, uint64_t seed);

/// Canonical JSONL (one record per instance).
std::string to_jsonl(const Dataset& dataset);
void write_jsonl(const std::string& path, const Dataset& dataset);
Dataset load(const std::string& canonical_jsonl_path);

nlohmann::json rejects_report(const Dataset& dataset);

}  // namespace ctxnoise::corpus
