// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxnoise/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <set>

#include "ctxnoise/csv.hpp"
#include "ctxnoise/error.hpp"
#include "ctxnoise/jsonl.hpp"
#include "ctxnoise/rng.hpp"
#include "ctxnoise/text.hpp"

namespace ctxnoise::corpus {

using nlohmann::json;

namespace {

const std::vector<std::string> kFields = {"id",           "source_lang",   "target_lang",
                                          "tier",         "source_sentence", "idiom_surface",
                                          "gold_meaning", "reference_translation", "provenance"};

std::string lower_ascii(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string pair_key(std::string_view s, std::string_view t) { return lower_ascii(std::string(s) + "-" + std::string(t)); }

// One raw record mapped onto canonical field names.
using RawRecord = std::map<std::string, std::string>;

std::string field_of(const RawRecord& rec, const std::string& name) {
  auto it = rec.find(name);
  return it == rec.end() ? std::string{} : it->second;
}

}  // namespace

std::string_view to_string(Tier tier) {
  switch (tier) {
    case Tier::kHigh: return "high";
    case Tier::kMedium: return "medium";
    case Tier::kLow: return "low";
  }
  return "high";
}

Tier parse_tier(std::string_view name) {
  const std::string n = lower_ascii(std::string(name));
  if (n == "high") return Tier::kHigh;
  if (n == "medium") return Tier::kMedium;
  if (n == "low") return Tier::kLow;
  fail(ErrorKind::kValidation, "unknown tier: " + std::string(name));
}

std::string LanguagePair::label() const { return capitalize(source_lang) + "→" + capitalize(target_lang); }

json to_json(const IdiomInstance& inst) {
  return json{{"id", inst.id},
              {"source_lang", inst.pair.source_lang},
              {"target_lang", inst.pair.target_lang},
              {"tier", std::string(to_string(inst.pair.tier))},
              {"source_sentence", inst.source_sentence},
              {"idiom_surface", inst.idiom_surface},
              {"gold_meaning", inst.gold_meaning},
              {"reference_translation", inst.reference_translation},
              {"provenance", inst.provenance}};
}

TierTable TierTable::builtin() {
  TierTable t;
  // Low: Persian and Hindi; medium: Finnish; everything else evaluated is high.
  t.set("hi", "en", Tier::kLow);
  t.set("fa", "en", Tier::kLow);
  t.set("en", "fa", Tier::kLow);
  t.set("fi", "en", Tier::kMedium);
  t.set("ja", "en", Tier::kHigh);
  t.set("fr", "en", Tier::kHigh);
  t.set("ko", "en", Tier::kHigh);
  t.set("ru", "en", Tier::kHigh);
  t.set("de", "en", Tier::kHigh);
  t.set("en", "de", Tier::kHigh);
  return t;
}

void TierTable::set(std::string_view source_lang, std::string_view target_lang, Tier tier) {
  table_[pair_key(source_lang, target_lang)] = tier;
}

void TierTable::apply_overrides(const json& overrides) {
  if (!overrides.is_object()) fail(ErrorKind::kConfig, "tier overrides must be an object of \"src-tgt\": tier");
  for (const auto& [key, value] : overrides.items()) {
    const auto dash = key.find('-');
    if (dash == std::string::npos || !value.is_string()) {
      fail(ErrorKind::kConfig, "bad tier override entry: " + key);
    }
    set(key.substr(0, dash), key.substr(dash + 1), parse_tier(value.get<std::string>()));
  }
}

std::optional<Tier> TierTable::find(std::string_view source_lang, std::string_view target_lang) const {
  auto it = table_.find(pair_key(source_lang, target_lang));
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

Tier TierTable::tier_of(std::string_view source_lang, std::string_view target_lang) const {
  if (auto t = find(source_lang, target_lang)) return *t;
  fail(ErrorKind::kValidation, "unknown language pair with no tier override: " + pair_key(source_lang, target_lang));
}

Tier tier_of(const LanguagePair& pair, const TierTable& table) { return table.tier_of(pair.source_lang, pair.target_lang); }

Dataset::Dataset(std::vector<IdiomInstance> instances) : instances_(std::move(instances)) {
  for (size_t i = 0; i < instances_.size(); ++i) {
    if (!index_.emplace(instances_[i].id, i).second) {
      fail(ErrorKind::kValidation, "duplicate id: " + instances_[i].id);
    }
  }
}

const IdiomInstance* Dataset::find(std::string_view id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &instances_[it->second];
}

const IdiomInstance& Dataset::at(std::string_view id) const {
  if (const auto* p = find(id)) return *p;
  fail(ErrorKind::kValidation, "unknown instance id: " + std::string(id));
}

std::vector<LanguagePair> Dataset::pairs() const {
  std::vector<LanguagePair> out;
  for (const auto& inst : instances_) {
    if (std::find(out.begin(), out.end(), inst.pair) == out.end()) out.push_back(inst.pair);
  }
  return out;
}

SourceFormat SourceFormat::parse(std::string_view descriptor) {
  SourceFormat f;
  const auto colon = descriptor.find(':');
  const std::string kind = lower_ascii(std::string(descriptor.substr(0, colon)));
  if (kind == "jsonl") {
    f.kind = Kind::kJsonl;
  } else if (kind == "csv") {
    f.kind = Kind::kCsv;
  } else if (kind == "tsv") {
    f.kind = Kind::kTsv;
  } else {
    fail(ErrorKind::kConfig, "unknown source format: " + std::string(descriptor));
  }
  for (const auto& name : kFields) f.columns[name] = name;
  if (colon == std::string_view::npos) return f;

  std::string_view rest = descriptor.substr(colon + 1);
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) fail(ErrorKind::kConfig, "bad column mapping: " + std::string(item));
    const std::string field(item.substr(0, eq));
    if (std::find(kFields.begin(), kFields.end(), field) == kFields.end()) {
      fail(ErrorKind::kConfig, "unknown canonical field in format descriptor: " + field);
    }
    f.columns[field] = std::string(item.substr(eq + 1));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return f;
}

namespace {

struct RawRow {
  size_t line = 0;
  RawRecord record;
  std::string parse_error;
};

std::vector<RawRow> read_rows(std::string_view data, const SourceFormat& format) {
  std::vector<RawRow> rows;
  auto resolve = [&](auto&& lookup) {
    RawRecord rec;
    for (const auto& [field, column] : format.columns) {
      if (!column.empty() && column[0] == '@') {
        rec[field] = column.substr(1);
      } else if (auto v = lookup(column)) {
        rec[field] = *v;
      }
    }
    return rec;
  };

  if (format.kind == SourceFormat::Kind::kJsonl) {
    size_t start = 0, number = 0;
    while (start <= data.size()) {
      size_t end = data.find('\n', start);
      if (end == std::string_view::npos) end = data.size();
      ++number;
      const std::string line = text::trim(data.substr(start, end - start));
      if (!line.empty()) {
        RawRow row;
        row.line = number;
        try {
          const json obj = json::parse(line);
          if (!obj.is_object()) throw std::runtime_error("not an object");
          row.record = resolve([&](const std::string& key) -> std::optional<std::string> {
            auto it = obj.find(key);
            if (it == obj.end() || it->is_null()) return std::nullopt;
            return it->is_string() ? it->get<std::string>() : it->dump();
          });
        } catch (const std::exception& e) {
          row.parse_error = std::string("malformed row: ") + e.what();
        }
        rows.push_back(std::move(row));
      }
      if (end == data.size()) break;
      start = end + 1;
    }
    return rows;
  }

  const char delim = format.kind == SourceFormat::Kind::kTsv ? '\t' : ',';
  const auto table = csv::parse(data, delim);
  if (table.empty()) return rows;
  std::map<std::string, size_t> header;
  for (size_t i = 0; i < table[0].fields.size(); ++i) header[text::trim(table[0].fields[i])] = i;
  for (size_t r = 1; r < table.size(); ++r) {
    RawRow row;
    row.line = table[r].line;
    const auto& fields = table[r].fields;
    if (fields.size() != table[0].fields.size()) {
      row.parse_error = "malformed row: expected " + std::to_string(table[0].fields.size()) + " columns, got " +
                        std::to_string(fields.size());
    } else {
      row.record = resolve([&](const std::string& column) -> std::optional<std::string> {
        auto it = header.find(column);
        if (it == header.end()) return std::nullopt;
        return fields[it->second];
      });
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

Dataset ingest_text(std::string_view data, const SourceFormat& format, std::string_view provenance,
                    const TierTable& tiers) {
  std::vector<IdiomInstance> valid;
  std::vector<Reject> rejects;
  std::set<std::string> ids;

  for (const auto& row : read_rows(data, format)) {
    const std::string id = text::trim(field_of(row.record, "id"));
    auto reject = [&](std::string reason) { rejects.push_back(Reject{row.line, id, std::move(reason)}); };
    if (!row.parse_error.empty()) {
      reject(row.parse_error);
      continue;
    }
    if (id.empty()) {
      reject("empty id");
      continue;
    }
    if (!ids.insert(id).second) {
      fail(ErrorKind::kValidation, "duplicate id: " + id + " (line " + std::to_string(row.line) + ")");
    }

    IdiomInstance inst;
    inst.id = id;
    inst.pair.source_lang = lower_ascii(text::trim(field_of(row.record, "source_lang")));
    inst.pair.target_lang = lower_ascii(text::trim(field_of(row.record, "target_lang")));
    inst.source_sentence = text::nfc(text::trim(field_of(row.record, "source_sentence")));
    inst.idiom_surface = text::nfc(text::trim(field_of(row.record, "idiom_surface")));
    inst.gold_meaning = text::nfc(text::trim(field_of(row.record, "gold_meaning")));
    inst.reference_translation = text::nfc(text::trim(field_of(row.record, "reference_translation")));
    inst.provenance = text::trim(field_of(row.record, "provenance"));
    if (inst.provenance.empty()) inst.provenance = std::string(provenance);

    if (inst.pair.source_lang.empty() || inst.pair.target_lang.empty()) {
      reject("missing language code");
      continue;
    }
    if (inst.pair.source_lang == inst.pair.target_lang) {
      reject("source_lang equals target_lang");
      continue;
    }
    const std::string tier_field = text::trim(field_of(row.record, "tier"));
    if (!tier_field.empty()) {
      try {
        inst.pair.tier = parse_tier(tier_field);
      } catch (const Error&) {
        reject("unknown tier: " + tier_field);
        continue;
      }
    } else if (auto t = tiers.find(inst.pair.source_lang, inst.pair.target_lang)) {
      inst.pair.tier = *t;
    } else {
      reject("unknown language pair: " + inst.pair.key());
      continue;
    }
    if (inst.source_sentence.empty()) {
      reject("empty source_sentence");
      continue;
    }
    if (inst.idiom_surface.empty()) {
      reject("empty idiom_surface");
      continue;
    }
    if (inst.gold_meaning.empty()) {
      reject("empty gold_meaning");
      continue;
    }
    if (inst.reference_translation.empty()) {
      reject("empty reference_translation");
      continue;
    }
    if (inst.source_sentence.find(inst.idiom_surface) == std::string::npos) {
      reject("idiom_surface not found in source_sentence");
      continue;
    }
    valid.push_back(std::move(inst));
  }

  if (valid.empty()) fail(ErrorKind::kValidation, "no valid rows in " + std::string(provenance));
  Dataset ds(std::move(valid));
  ds.rejects = std::move(rejects);
  return ds;
}

Dataset ingest(const std::string& path, const SourceFormat& format, const TierTable& tiers) {
  const std::string data = text::read_file(path);
  return ingest_text(data, format, std::filesystem::path(path).stem().string(), tiers);
}

Dataset sample(const Dataset& dataset, size_t n, uint64_t seed) {
  if (dataset.empty()) fail(ErrorKind::kValidation, "cannot sample from an empty dataset");
  if (n == 0) fail(ErrorKind::kConfig, "sample size must be at least 1");

  std::vector<IdiomInstance> out;
  std::vector<std::string> warnings;
  for (const auto& pair : dataset.pairs()) {
    std::vector<size_t> members;
    for (size_t i = 0; i < dataset.instances().size(); ++i) {
      if (dataset.instances()[i].pair == pair) members.push_back(i);
    }
    std::vector<size_t> chosen;
    if (n >= members.size()) {
      chosen = members;
      if (n > members.size()) {
        warnings.push_back("pair " + pair.key() + " has " + std::to_string(members.size()) +
                           " instances, fewer than the requested " + std::to_string(n));
      }
    } else {
      // Partial Fisher-Yates over the member list, one stream per pair.
      auto gen = rng::make(seed, pair.key());
      for (size_t i = 0; i < n; ++i) {
        const size_t j = i + static_cast<size_t>(rng::below(gen, members.size() - i));
        std::swap(members[i], members[j]);
      }
      chosen.assign(members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n));
      std::sort(chosen.begin(), chosen.end());
    }
    for (size_t i : chosen) out.push_back(dataset.instances()[i]);
  }
  Dataset result(std::move(out));
  result.warnings = std::move(warnings);
  return result;
}

std::string to_jsonl(const Dataset& dataset) {
  std::vector<json> records;
  records.reserve(dataset.size());
  for (const auto& inst : dataset.instances()) records.push_back(to_json(inst));
  return jsonl::dump(records);
}

void write_jsonl(const std::string& path, const Dataset& dataset) { text::write_file_atomic(path, to_jsonl(dataset)); }

Dataset load(const std::string& canonical_jsonl_path) {
  return ingest(canonical_jsonl_path, SourceFormat::parse("jsonl"));
}

json rejects_report(const Dataset& dataset) {
  json rows = json::array();
  for (const auto& r : dataset.rejects) rows.push_back({{"line", r.line}, {"id", r.id}, {"reason", r.reason}});
  return json{{"rejects", rows}, {"warnings", dataset.warnings}, {"accepted", dataset.size()}};
}

}  // namespace ctxnoise::corpus
