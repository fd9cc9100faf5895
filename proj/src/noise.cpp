// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxnoise/noise.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "ctxnoise/error.hpp"
#include "ctxnoise/jsonl.hpp"
#include "ctxnoise/numerics.hpp"
#include "ctxnoise/parallel.hpp"
#include "ctxnoise/templates.hpp"
#include "ctxnoise/text.hpp"

namespace ctxnoise::noise {

using nlohmann::json;

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kStruct: return "struct";
    case NoiseKind::kLiteral: return "literal";
    case NoiseKind::kSemantic: return "semantic";
    case NoiseKind::kOpposite: return "opposite";
  }
  return "struct";
}

NoiseKind parse_kind(std::string_view name) {
  for (auto k : kAllKinds) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorKind::kValidation, "unknown noise kind: " + std::string(name));
}

bool is_semantic(NoiseKind kind) { return kind != NoiseKind::kStruct; }

const std::string& NoiseSet::at(NoiseKind kind) const {
  auto it = meanings.find(kind);
  if (it == meanings.end()) {
    fail(ErrorKind::kValidation, "instance " + instance_id + " has no " + std::string(to_string(kind)) + " noise");
  }
  return it->second;
}

json to_json(const NoiseSet& set) {
  json meanings = json::object();
  for (const auto& [k, v] : set.meanings) meanings[std::string(to_string(k))] = v;
  return json{{"instance_id", set.instance_id},
              {"meanings", meanings},
              {"generator_id", set.generator_id},
              {"prompt_hash", set.prompt_hash}};
}

NoiseSet noise_set_from_json(const json& j) {
  NoiseSet s;
  s.instance_id = j.at("instance_id").get<std::string>();
  for (const auto& [k, v] : j.at("meanings").items()) s.meanings[parse_kind(k)] = v.get<std::string>();
  s.generator_id = j.value("generator_id", std::string());
  s.prompt_hash = j.value("prompt_hash", std::string());
  return s;
}

void check_invariants(const NoiseSet& set, const corpus::IdiomInstance& instance) {
  for (auto k : kAllKinds) {
    auto it = set.meanings.find(k);
    if (it == set.meanings.end() || text::trim(it->second).empty()) {
      fail(ErrorKind::kValidation, "instance " + set.instance_id + ": missing " + std::string(to_string(k)) + " noise");
    }
    if (is_semantic(k) && text::casefold(text::trim(it->second)) == text::casefold(instance.gold_meaning)) {
      fail(ErrorKind::kValidation,
           "instance " + set.instance_id + ": " + std::string(to_string(k)) + " noise equals the gold meaning");
    }
  }
}

void write_jsonl(const std::string& path, const NoiseSets& sets) {
  std::vector<json> rows;
  for (const auto& [id, s] : sets) rows.push_back(to_json(s));
  jsonl::write(path, rows);
}

NoiseSets load_jsonl(const std::string& path) {
  NoiseSets out;
  for (const auto& line : jsonl::read(path)) {
    NoiseSet s;
    try {
      s = noise_set_from_json(line.value);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail(ErrorKind::kValidation, path + ":" + std::to_string(line.number) + ": " + e.what());
    }
    if (!out.emplace(s.instance_id, s).second) {
      fail(ErrorKind::kValidation, path + ":" + std::to_string(line.number) + ": duplicate instance_id " + s.instance_id);
    }
  }
  return out;
}

std::string language_name(std::string_view iso) {
  static const std::map<std::string, std::string, std::less<>> names = {
      {"en", "English"}, {"de", "German"},  {"fr", "French"},  {"fi", "Finnish"}, {"fa", "Persian"},
      {"hi", "Hindi"},   {"ja", "Japanese"}, {"ko", "Korean"}, {"ru", "Russian"}, {"zh", "Chinese"},
      {"es", "Spanish"}, {"it", "Italian"}, {"pt", "Portuguese"}};
  auto it = names.find(iso);
  return it == names.end() ? std::string(iso) : it->second;
}

NoiseTemplates NoiseTemplates::load(const std::optional<std::string>& dir) {
  NoiseTemplates t;
  for (auto k : kAllKinds) t.by_kind[k] = templates::load("noise_" + std::string(to_string(k)), dir);
  return t;
}

std::string NoiseTemplates::digest() const {
  std::string all;
  for (const auto& [k, v] : by_kind) {
    all += std::string(to_string(k)) + '\0' + v + '\0';
  }
  return text::sha256_hex(all);
}

std::string clean_generation(std::string_view raw) {
  std::istringstream in{std::string(raw)};
  std::string line;
  while (std::getline(in, line)) {
    std::string t = text::trim(line);
    if (t.empty()) continue;
    while (t.size() >= 2 && ((t.front() == '"' && t.back() == '"') || (t.front() == '\'' && t.back() == '\''))) {
      t = text::trim(t.substr(1, t.size() - 2));
    }
    return t;
  }
  return {};
}

std::string synthesize_noise(const corpus::IdiomInstance& instance, NoiseKind kind, gateway::ChatClient& generator,
                             gateway::ResponseCache& cache, const NoiseTemplates& templates,
                             const SynthOptions& options) {
  if (instance.gold_meaning.empty()) fail(ErrorKind::kValidation, "instance " + instance.id + " has no gold meaning");
  const std::string meaning_lang =
      options.meaning_language.empty() ? instance.pair.target_lang : options.meaning_language;
  const std::map<std::string, std::string> vars = {
      {"idiom", instance.idiom_surface},
      {"gold_meaning", instance.gold_meaning},
      {"source_language", language_name(instance.pair.source_lang)},
      {"meaning_language", language_name(meaning_lang)},
      {"kind", std::string(to_string(kind))},
  };
  const std::string prompt = text::render(templates.by_kind.at(kind), vars);
  const std::string gold_folded = text::casefold(instance.gold_meaning);

  bool saw_degenerate = false;
  for (int attempt = 0; attempt < std::max(1, options.max_attempts); ++attempt) {
    gateway::ChatRequest req;
    req.model_id = generator.model_id();
    req.messages = {{"user", prompt}};
    req.params = gateway::DecodeParams::sampled(options.temperature, options.max_tokens);
    req.cache_salt = "attempt-" + std::to_string(attempt);
    req.purpose = "noise:" + std::string(to_string(kind));
    req.vars = vars;
    const auto out = gateway::complete_cached(generator, cache, req);
    const std::string meaning = clean_generation(out.response.content);
    if (meaning.empty()) continue;
    if (is_semantic(kind) && text::casefold(meaning) == gold_folded) {
      saw_degenerate = true;
      continue;
    }
    return meaning;
  }
  if (saw_degenerate) {
    fail(ErrorKind::kValidation, "degenerate noise: " + std::string(to_string(kind)) + " generation for " + instance.id +
                                     " repeated the gold meaning on every attempt");
  }
  fail(ErrorKind::kUpstream, "empty generation: " + std::string(to_string(kind)) + " noise for " + instance.id);
}

NoiseSet synthesize_set(const corpus::IdiomInstance& instance, gateway::ChatClient& generator,
                        gateway::ResponseCache& cache, const NoiseTemplates& templates, const SynthOptions& options) {
  NoiseSet set;
  set.instance_id = instance.id;
  set.generator_id = generator.model_id();
  set.prompt_hash = templates.digest();
  for (auto k : kAllKinds) set.meanings[k] = synthesize_noise(instance, k, generator, cache, templates, options);
  return set;
}

NoiseSets synthesize_all(const corpus::Dataset& dataset, gateway::ChatClient& generator,
                         gateway::ResponseCache& cache, const NoiseTemplates& templates,
                         const SynthOptions& options, const NoiseSets& existing) {
  const auto& items = dataset.instances();
  std::vector<std::optional<NoiseSet>> results(items.size());
  parallel_for(items.size(), options.concurrency, [&](size_t i) {
    if (auto it = existing.find(items[i].id); it != existing.end() && it->second.complete()) {
      results[i] = it->second;
      return;
    }
    results[i] = synthesize_set(items[i], generator, cache, templates, options);
  });
  NoiseSets out;
  for (auto& r : results) out.emplace(r->instance_id, std::move(*r));
  return out;
}

// ---- scoring clients -------------------------------------------------------

std::string_view to_string(NliLabel label) {
  switch (label) {
    case NliLabel::kEntailment: return "entailment";
    case NliLabel::kNeutral: return "neutral";
    case NliLabel::kContradiction: return "contradiction";
  }
  return "neutral";
}

NliLabel parse_nli_label(std::string_view name) {
  std::string n = text::casefold(name);
  if (n == "entailment") return NliLabel::kEntailment;
  if (n == "neutral") return NliLabel::kNeutral;
  if (n == "contradiction") return NliLabel::kContradiction;
  fail(ErrorKind::kUpstream, "unknown NLI label: " + std::string(name));
}

NliLabel argmax_label(const std::map<NliLabel, double>& scores) {
  if (scores.empty()) fail(ErrorKind::kUpstream, "NLI client returned no scores");
  NliLabel best = scores.begin()->first;
  double best_score = scores.begin()->second;
  for (const auto& [label, s] : scores) {
    if (!std::isfinite(s)) fail(ErrorKind::kUpstream, "NLI client returned a non-finite score");
    if (s > best_score) {
      best = label;
      best_score = s;
    }
  }
  return best;
}

double HttpEmbeddingSimilarity::similarity(const std::string& a, const std::string& b) {
  const json resp = gateway::post_json(config_, "/embeddings", json{{"model", config_.model_id}, {"input", {a, b}}});
  if (!resp.contains("data") || resp["data"].size() != 2) fail(ErrorKind::kUpstream, "embeddings response lacks two vectors");
  std::vector<std::vector<double>> vecs(2);
  for (const auto& item : resp["data"]) {
    const size_t idx = item.value("index", vecs[0].empty() ? size_t{0} : size_t{1});
    if (idx > 1) fail(ErrorKind::kUpstream, "embeddings response index out of range");
    vecs[idx] = item.at("embedding").get<std::vector<double>>();
  }
  if (vecs[0].size() != vecs[1].size() || vecs[0].empty()) fail(ErrorKind::kUpstream, "embedding dimensions differ");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < vecs[0].size(); ++i) {
    dot += vecs[0][i] * vecs[1][i];
    na += vecs[0][i] * vecs[0][i];
    nb += vecs[1][i] * vecs[1][i];
  }
  if (na == 0 || nb == 0) fail(ErrorKind::kUpstream, "zero embedding vector");
  return dot / std::sqrt(na * nb);
}

std::map<NliLabel, double> HttpNliClient::classify(const std::string& premise, const std::string& hypothesis) {
  const json resp = gateway::post_json(config_, "", json{{"premise", premise}, {"hypothesis", hypothesis}});
  std::map<NliLabel, double> out;
  if (resp.contains("scores")) {
    for (const auto& [k, v] : resp["scores"].items()) out[parse_nli_label(k)] = v.get<double>();
  } else if (resp.contains("label")) {
    out[parse_nli_label(resp["label"].get<std::string>())] = 1.0;
  } else {
    fail(ErrorKind::kUpstream, "NLI response has neither scores nor label");
  }
  return out;
}

namespace {

std::map<std::string, double> bag(const std::string& s) {
  std::map<std::string, double> counts;
  for (const auto& tok : text::tokenize(text::casefold(s))) counts[tok] += 1.0;
  return counts;
}

}  // namespace

double BagOfWordsSimilarity::similarity(const std::string& a, const std::string& b) {
  const auto ba = bag(a), bb = bag(b);
  double dot = 0, na = 0, nb = 0;
  for (const auto& [w, c] : ba) {
    na += c * c;
    if (auto it = bb.find(w); it != bb.end()) dot += c * it->second;
  }
  for (const auto& [w, c] : bb) nb += c * c;
  if (na == 0 || nb == 0) return 0.0;
  return dot / std::sqrt(na * nb);
}

std::map<NliLabel, double> LexicalNli::classify(const std::string& premise, const std::string& hypothesis) {
  if (text::casefold(text::trim(premise)) == text::casefold(text::trim(hypothesis))) {
    return {{NliLabel::kEntailment, 1.0}};
  }
  const auto bp = bag(premise), bh = bag(hypothesis);
  for (const auto& [w, c] : bh) {
    if (bp.count(w)) return {{NliLabel::kNeutral, 1.0}};
  }
  return {{NliLabel::kContradiction, 1.0}};
}

// ---- validation ------------------------------------------------------------

json NoiseValidationReport::to_json() const {
  auto stats = [](const ValidationStats& s) {
    return json{{"ter_struct", s.ter_struct},
                {"sim_g_struct", s.sim_g_struct},
                {"sim_g_literal", s.sim_g_literal},
                {"sim_literal_semantic", s.sim_literal_semantic},
                {"sim_g_semantic", s.sim_g_semantic},
                {"cr_opposite", s.cr_opposite},
                {"instances", s.instances},
                {"contradictions", s.contradictions}};
  };
  json pairs = json::object();
  for (const auto& [k, s] : per_pair) pairs[k] = stats(s);
  return json{{"overall", stats(overall)},
              {"per_pair", pairs},
              {"clamped_similarities", clamped_similarities},
              {"inexact_ter", inexact_ter}};
}

std::string NoiseValidationReport::to_table() const {
  std::ostringstream out;
  out << std::fixed;
  auto row = [&](const std::string& name, const ValidationStats& s) {
    out << std::left << std::setw(10) << name << std::right << std::setprecision(1) << std::setw(8) << s.ter_struct
        << std::setprecision(2) << std::setw(9) << s.sim_g_struct << std::setw(9) << s.sim_g_literal << std::setw(9)
        << s.sim_literal_semantic << std::setw(9) << s.sim_g_semantic << std::setw(8) << s.cr_opposite << std::setw(6)
        << s.instances << "\n";
  };
  out << std::left << std::setw(10) << "pair" << std::right << std::setw(8) << "TER" << std::setw(9) << "S(G,st)"
      << std::setw(9) << "S(G,li)" << std::setw(9) << "S(li,se)" << std::setw(9) << "S(G,se)" << std::setw(8) << "CR"
      << std::setw(6) << "n" << "\n";
  for (const auto& [k, s] : per_pair) row(k, s);
  row("all", overall);
  return out.str();
}

NoiseValidationReport validate_noise(const corpus::Dataset& dataset, const NoiseSets& noise,
                                     SimilarityClient& sim_client, NliClient& nli_client,
                                     const ValidateOptions& options) {
  struct Item {
    double ter = 0, s_gs = 0, s_gl = 0, s_ls = 0, s_gse = 0;
    bool contradiction = false;
    size_t clamped = 0;
    bool inexact = false;
  };
  const auto& items = dataset.instances();
  for (const auto& inst : items) {
    auto it = noise.find(inst.id);
    if (it == noise.end() || !it->second.complete()) {
      fail(ErrorKind::kValidation, "missing or incomplete NoiseSet for instance " + inst.id);
    }
  }
  std::vector<Item> scored(items.size());
  parallel_for(items.size(), options.concurrency, [&](size_t i) {
    const auto& inst = items[i];
    const auto& set = noise.find(inst.id)->second;
    const std::string& g = inst.gold_meaning;
    Item item;
    const auto ref = text::tokenize(g);
    const auto hyp = text::tokenize(set.at(NoiseKind::kStruct));
    const auto ter = numerics::ter_detail(ref, hyp);
    item.ter = ter.score;
    item.inexact = !ter.exact;
    auto sim = [&](const std::string& a, const std::string& b) {
      const double v = sim_client.similarity(a, b);
      if (!std::isfinite(v)) fail(ErrorKind::kUpstream, "similarity client returned a non-finite value");
      if (v < -1.0 || v > 1.0) {
        ++item.clamped;
        return std::clamp(v, -1.0, 1.0);
      }
      return v;
    };
    item.s_gs = sim(g, set.at(NoiseKind::kStruct));
    item.s_gl = sim(g, set.at(NoiseKind::kLiteral));
    item.s_ls = sim(set.at(NoiseKind::kLiteral), set.at(NoiseKind::kSemantic));
    item.s_gse = sim(g, set.at(NoiseKind::kSemantic));
    item.contradiction = argmax_label(nli_client.classify(g, set.at(NoiseKind::kOpposite))) == NliLabel::kContradiction;
    scored[i] = item;
  });

  struct Acc {
    double ter = 0, s_gs = 0, s_gl = 0, s_ls = 0, s_gse = 0;
    size_t n = 0, contradictions = 0;
    void add(const Item& it) {
      ter += it.ter;
      s_gs += it.s_gs;
      s_gl += it.s_gl;
      s_ls += it.s_ls;
      s_gse += it.s_gse;
      contradictions += it.contradiction ? 1 : 0;
      ++n;
    }
    ValidationStats finish() const {
      ValidationStats s;
      if (n == 0) return s;
      const double d = static_cast<double>(n);
      s.ter_struct = ter / d;
      s.sim_g_struct = s_gs / d;
      s.sim_g_literal = s_gl / d;
      s.sim_literal_semantic = s_ls / d;
      s.sim_g_semantic = s_gse / d;
      s.cr_opposite = static_cast<double>(contradictions) / d;
      s.instances = n;
      s.contradictions = contradictions;
      return s;
    }
  };

  NoiseValidationReport report;
  Acc all;
  std::map<std::string, Acc> by_pair;
  for (size_t i = 0; i < items.size(); ++i) {
    all.add(scored[i]);
    by_pair[items[i].pair.key()].add(scored[i]);
    report.clamped_similarities += scored[i].clamped;
    report.inexact_ter += scored[i].inexact ? 1 : 0;
  }
  report.overall = all.finish();
  for (const auto& [k, acc] : by_pair) report.per_pair[k] = acc.finish();
  return report;
}

gateway::ChatResponse OfflineNoiseGenerator::complete(const gateway::ChatRequest& request) {
  ++calls_;
  auto var = [&](const char* name) {
    auto it = request.vars.find(name);
    return it == request.vars.end() ? std::string() : it->second;
  };
  const std::string kind = var("kind");
  const std::string idiom = var("idiom");
  const std::string gold = var("gold_meaning");
  std::string out;
  if (kind == "struct") {
    auto words = text::tokenize(gold);
    std::reverse(words.begin(), words.end());
    out = text::join(words, " ");
  } else if (kind == "literal") {
    out = "literally " + idiom;
  } else if (kind == "semantic") {
    out = "literally " + idiom + " elsewhere";
  } else if (kind == "opposite") {
    out = "not " + gold;
  } else {
    fail(ErrorKind::kUpstream, "offline generator got a request without a noise kind");
  }
  gateway::ChatResponse r;
  r.content = out;
  r.raw = json{{"content", out}}.dump();
  return r;
}

}  // namespace ctxnoise::noise
