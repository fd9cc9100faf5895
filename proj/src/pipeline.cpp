// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxnoise/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "ctxnoise/csv.hpp"
#include "ctxnoise/error.hpp"
#include "ctxnoise/gateway.hpp"
#include "ctxnoise/jsonl.hpp"
#include "ctxnoise/parallel.hpp"
#include "ctxnoise/templates.hpp"
#include "ctxnoise/text.hpp"
#include "ctxnoise/trace.hpp"

namespace ctxnoise::pipeline {

namespace fs = std::filesystem;
using conditions::Condition;

namespace {

std::string resolve(const std::string& base, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || base.empty()) return path.lexically_normal().string();
  return (fs::path(base) / path).lexically_normal().string();
}

std::string file_sha(const std::string& path) { return text::sha256_hex(text::read_file(path)); }

std::string fmt(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, eval::round_half_up(x, decimals));
  return buf;
}

std::string pair_label(const std::string& key) {
  const auto dash = key.find('-');
  if (dash == std::string::npos) return key;
  return corpus::LanguagePair{key.substr(0, dash), key.substr(dash + 1)}.label();
}

// Canonical pair order, borrowed from the aggregate table columns.
std::vector<std::string> ordered_pairs(const std::set<std::string>& keys) {
  eval::AggregateRow row;
  for (const auto& k : keys) row.fidelity[k] = 0.0;
  return eval::pair_columns({row});
}

// Canonical conditions first, anything else after by name.
std::vector<std::string> ordered_conditions(const std::set<std::string>& names) {
  std::vector<std::string> out;
  for (Condition c : conditions::kAllConditions) {
    if (names.count(std::string(conditions::to_string(c)))) out.emplace_back(conditions::to_string(c));
  }
  for (const auto& n : names) {
    if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
  }
  return out;
}

// Digest of every *.txt in a template override directory.
std::string template_dir_digest(const std::optional<std::string>& dir) {
  if (!dir) return "";
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(*dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path().filename().string());
  }
  std::sort(files.begin(), files.end());
  json j = json::object();
  for (const auto& f : files) j[f] = file_sha((fs::path(*dir) / f).string());
  return text::sha256_hex(j.dump());
}

json endpoint_identity(const std::optional<gateway::EndpointConfig>& e) {
  if (!e) return nullptr;
  return {{"kind", e->kind}, {"model_id", e->model_id}};
}

json judge_options_json(const eval::JudgeOptions& o) {
  return {{"runs", o.runs},
          {"temperature", o.temperature},
          {"max_tokens", o.max_tokens},
          {"max_resamples", o.max_resamples},
          {"max_unparseable_fraction", o.max_unparseable_fraction},
          {"include_reference", o.include_reference},
          {"car_temperature", o.car_temperature}};
}

json synth_options_json(const noise::SynthOptions& o) {
  return {{"max_attempts", o.max_attempts},
          {"temperature", o.temperature},
          {"max_tokens", o.max_tokens},
          {"meaning_language", o.meaning_language}};
}

void require_path(const std::string& what, const std::string& path) {
  if (!fs::exists(path)) fail(ErrorKind::kConfig, what + " does not exist: " + path);
}

void require_artifact(const std::string& what, const std::string& path) {
  if (!fs::exists(path)) fail(ErrorKind::kValidation, what + " needs " + path + ", which is missing");
}

std::string car_csv(const std::map<std::string, std::map<std::string, eval::CARRate>>& rates) {
  std::ostringstream out;
  out << "condition,pair,adopted,total,car_percent\n";
  std::set<std::string> conds;
  for (const auto& kv : rates) conds.insert(kv.first);
  for (const auto& c : ordered_conditions(conds)) {
    const auto& by_pair = rates.at(c);
    std::set<std::string> keys;
    for (const auto& kv : by_pair)
      if (kv.first != "all") keys.insert(kv.first);
    auto cols = ordered_pairs(keys);
    cols.push_back("all");
    for (const auto& p : cols) {
      const auto& r = by_pair.at(p);
      out << csv::format_row({c, p, std::to_string(r.adopted), std::to_string(r.total), fmt(100.0 * r.rate(), 2)});
    }
  }
  return out.str();
}

std::string car_text(const std::map<std::string, std::map<std::string, eval::CARRate>>& rates) {
  std::set<std::string> conds, keys;
  for (const auto& [c, by_pair] : rates) {
    conds.insert(c);
    for (const auto& kv : by_pair)
      if (kv.first != "all") keys.insert(kv.first);
  }
  const auto cols = ordered_pairs(keys);
  std::vector<std::string> header{"condition"};
  for (const auto& p : cols) header.push_back(pair_label(p));
  header.push_back("All");
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : ordered_conditions(conds)) {
    std::vector<std::string> line{c};
    const auto& by_pair = rates.at(c);
    for (const auto& p : cols) {
      auto it = by_pair.find(p);
      line.push_back(it == by_pair.end() ? "-" : fmt(100.0 * it->second.rate(), 1) + "%");
    }
    line.push_back(fmt(100.0 * by_pair.at("all").rate(), 1) + "%");
    rows.push_back(std::move(line));
  }
  return format_text_table(header, rows);
}

// ---- run ledger ----------------------------------------------------------------

class Ledger {
 public:
  Ledger(std::string dir, json header) : dir_(std::move(dir)), doc_(std::move(header)) {
    doc_["stages"] = json::array();
    const auto path = (fs::path(dir_) / "run_ledger.json").string();
    if (fs::exists(path)) {
      try {
        const auto old = json::parse(text::read_file(path));
        const json stages = old.value("stages", json::array());
        for (const auto& s : stages) prior_[s.value("name", "")] = s;
      } catch (const json::exception&) {
        // A damaged ledger only costs reuse.
      }
    }
  }

  const json* reusable(const std::string& name, const std::string& digest) const {
    auto it = prior_.find(name);
    if (it == prior_.end()) return nullptr;
    const auto& s = it->second;
    if (s.value("status", "") != "done" || s.value("input_digest", "") != digest) return nullptr;
    const json outputs = s.value("outputs", json::object());
    for (const auto& [file, sha] : outputs.items()) {
      const auto p = (fs::path(dir_) / file).string();
      if (!fs::exists(p) || file_sha(p) != sha.get<std::string>()) return nullptr;
    }
    return &s;
  }

  void add(json stage) {
    doc_["stages"].push_back(std::move(stage));
    save();
  }

  void set(const std::string& key, json value) { doc_[key] = std::move(value); }

  void save() const { text::write_file_atomic((fs::path(dir_) / "run_ledger.json").string(), doc_.dump(2) + "\n"); }

 private:
  std::string dir_;
  json doc_;
  std::map<std::string, json> prior_;
};

struct Clients {
  std::unique_ptr<gateway::ChatClient> translator;
  std::unique_ptr<gateway::ChatClient> judge;
  std::unique_ptr<gateway::ChatClient> generator;
  std::unique_ptr<noise::SimilarityClient> similarity;
  std::unique_ptr<noise::NliClient> nli;

  size_t calls() const {
    size_t n = 0;
    for (const auto* c : {translator.get(), judge.get(), generator.get()})
      if (c) n += c->calls();
    return n;
  }
};

double hit_ratio(size_t hits, size_t misses) {
  return hits + misses == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(hits + misses);
}

}  // namespace

std::string format_car_csv(const std::map<std::string, std::map<std::string, eval::CARRate>>& rates) {
  return car_csv(rates);
}

std::string format_car_table(const std::map<std::string, std::map<std::string, eval::CARRate>>& rates) {
  return car_text(rates);
}

// ---- config --------------------------------------------------------------------

RunConfig RunConfig::from_json(const json& j, const std::string& base_dir) {
  static const std::set<std::string> kKeys = {
      "datasets", "tiers",         "pairs",      "conditions",   "sample_size", "seed",
      "endpoints", "translate",    "judge",      "synth",        "noise",       "validate_noise",
      "aux_scores", "template_dir", "cache_dir", "output_dir",   "concurrency"};
  if (!j.is_object()) fail(ErrorKind::kConfig, "config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (!kKeys.count(k)) fail(ErrorKind::kConfig, "unknown config key: " + k);
  }
  RunConfig c;
  try {
    for (const auto& d : j.value("datasets", json::array())) {
      DatasetSource src;
      if (d.is_string()) {
        src.path = d.get<std::string>();
      } else {
        src.path = d.at("path").get<std::string>();
        src.format = d.value("format", src.format);
      }
      src.path = resolve(base_dir, src.path);
      c.datasets.push_back(std::move(src));
    }
    c.tiers = j.value("tiers", json::object());
    c.pairs = j.value("pairs", std::vector<std::string>{});
    if (j.contains("conditions")) {
      const auto& cj = j["conditions"];
      if (cj.is_string()) {
        c.conditions = conditions::parse_conditions(cj.get<std::string>());
      } else {
        std::string list;
        for (const auto& x : cj) list += (list.empty() ? "" : ",") + x.get<std::string>();
        c.conditions = conditions::parse_conditions(list);
      }
    }
    c.sample_size = j.value("sample_size", c.sample_size);
    c.seed = j.value("seed", c.seed);
    c.concurrency = j.value("concurrency", c.concurrency);

    const auto endpoints = j.value("endpoints", json::object());
    for (const auto& [role, e] : endpoints.items()) {
      auto cfg = gateway::EndpointConfig::from_json(e, role);
      if (role == "translator") c.translator = cfg;
      else if (role == "judge") c.judge = cfg;
      else if (role == "generator") c.generator = cfg;
      else if (role == "similarity") c.similarity = cfg;
      else if (role == "nli") c.nli = cfg;
      else fail(ErrorKind::kConfig, "unknown endpoint role: " + role);
    }

    if (j.contains("translate")) c.translate_params = gateway::DecodeParams::from_json(j["translate"]);

    c.judge_options.concurrency = c.concurrency;
    if (j.contains("judge")) {
      const auto& jj = j["judge"];
      auto& o = c.judge_options;
      c.judge_fidelity = jj.value("fidelity", c.judge_fidelity);
      c.judge_car = jj.value("car", c.judge_car);
      o.runs = jj.value("runs", o.runs);
      o.temperature = jj.value("temperature", o.temperature);
      o.max_tokens = jj.value("max_tokens", o.max_tokens);
      o.max_resamples = jj.value("max_resamples", o.max_resamples);
      o.max_unparseable_fraction = jj.value("max_unparseable_fraction", o.max_unparseable_fraction);
      o.include_reference = jj.value("include_reference", o.include_reference);
      o.car_temperature = jj.value("car_temperature", o.car_temperature);
      o.concurrency = jj.value("concurrency", o.concurrency);
      if (o.runs <= 0) fail(ErrorKind::kConfig, "judge.runs must be positive");
    }

    c.synth_options.concurrency = c.concurrency;
    if (j.contains("synth")) {
      const auto& s = j["synth"];
      auto& o = c.synth_options;
      o.max_attempts = s.value("max_attempts", o.max_attempts);
      o.temperature = s.value("temperature", o.temperature);
      o.max_tokens = s.value("max_tokens", o.max_tokens);
      o.meaning_language = s.value("meaning_language", o.meaning_language);
      o.concurrency = s.value("concurrency", o.concurrency);
    }

    c.validate_noise = j.value("validate_noise", c.validate_noise);
    if (j.contains("noise")) c.noise_path = resolve(base_dir, j["noise"].get<std::string>());
    if (j.contains("aux_scores")) c.aux_scores = resolve(base_dir, j["aux_scores"].get<std::string>());
    if (j.contains("template_dir")) c.template_dir = resolve(base_dir, j["template_dir"].get<std::string>());
    c.cache_dir = resolve(base_dir, j.value("cache_dir", std::string("cache")));
    c.output_dir = resolve(base_dir, j.value("output_dir", std::string("results")));
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("malformed config: ") + e.what());
  }
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  if (!fs::exists(path)) fail(ErrorKind::kConfig, "config file does not exist: " + path);
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, path + ": " + e.what());
  }
  const auto base = fs::absolute(path).parent_path().string();
  return from_json(j, base);
}

void RunConfig::validate() const {
  if (datasets.empty()) fail(ErrorKind::kConfig, "no datasets configured");
  for (const auto& d : datasets) {
    require_path("dataset", d.path);
    corpus::SourceFormat::parse(d.format);
  }
  if (noise_path) require_path("noise file", *noise_path);
  if (aux_scores) require_path("aux score file", *aux_scores);
  if (template_dir) require_path("template directory", *template_dir);
  if (sample_size == 0) fail(ErrorKind::kConfig, "sample_size must be positive");
  if (conditions.empty()) fail(ErrorKind::kConfig, "no conditions configured");
  if (!translator) fail(ErrorKind::kConfig, "endpoints.translator is required");
  if ((judge_fidelity || judge_car) && !judge) {
    fail(ErrorKind::kConfig, "judging is requested but endpoints.judge is not configured");
  }
  const bool noisy = std::any_of(conditions.begin(), conditions.end(),
                                 [](Condition c) { return conditions::noise_kind(c).has_value(); });
  if ((noisy || validate_noise) && !generator && !noise_path) {
    fail(ErrorKind::kConfig, "noisy conditions need endpoints.generator or a noise file");
  }
  if (judge_car && std::find(conditions.begin(), conditions.end(), Condition::kNone) == conditions.end()) {
    fail(ErrorKind::kConfig, "CAR needs the none condition for its baselines");
  }
  if (validate_noise && (!similarity || !nli)) {
    fail(ErrorKind::kConfig, "validate_noise needs endpoints.similarity and endpoints.nli");
  }
  if (output_dir.empty()) fail(ErrorKind::kConfig, "output_dir is empty");
  if (cache_dir.empty()) fail(ErrorKind::kConfig, "cache_dir is empty");
}

// ---- clients -------------------------------------------------------------------

std::unique_ptr<gateway::ChatClient> make_chat_client(const gateway::EndpointConfig& config, std::string_view role,
                                                      const std::optional<std::string>& template_dir) {
  if (config.kind == "http") return std::make_unique<gateway::HttpChatClient>(config);
  if (role == "translator") {
    return std::make_unique<gateway::MockTranslator>(templates::load("context_block", template_dir));
  }
  if (role == "judge") return std::make_unique<eval::StubJudge>();
  if (role == "generator") return std::make_unique<noise::OfflineNoiseGenerator>();
  fail(ErrorKind::kConfig, "no offline double for role " + std::string(role));
}

std::unique_ptr<noise::SimilarityClient> make_similarity_client(const gateway::EndpointConfig& config) {
  if (config.kind == "http") return std::make_unique<noise::HttpEmbeddingSimilarity>(config);
  return std::make_unique<noise::BagOfWordsSimilarity>();
}

std::unique_ptr<noise::NliClient> make_nli_client(const gateway::EndpointConfig& config) {
  if (config.kind == "http") return std::make_unique<noise::HttpNliClient>(config);
  return std::make_unique<noise::LexicalNli>();
}

corpus::Dataset load_datasets(const RunConfig& config, json* rejects) {
  auto tiers = corpus::TierTable::builtin();
  tiers.apply_overrides(config.tiers);
  const std::set<std::string> keep(config.pairs.begin(), config.pairs.end());
  std::vector<corpus::IdiomInstance> all;
  json report = json::array();
  std::vector<std::string> warnings;
  for (const auto& src : config.datasets) {
    auto ds = corpus::ingest(src.path, corpus::SourceFormat::parse(src.format), tiers);
    auto r = corpus::rejects_report(ds);
    r["path"] = fs::path(src.path).filename().string();
    report.push_back(std::move(r));
    for (const auto& inst : ds.instances()) {
      if (keep.empty() || keep.count(inst.pair.key())) all.push_back(inst);
    }
  }
  if (rejects) *rejects = std::move(report);
  if (all.empty()) fail(ErrorKind::kValidation, "no instances left after ingestion and pair filtering");
  return corpus::Dataset(std::move(all));
}

// ---- run -------------------------------------------------------------------------

RunSummary run(const RunConfig& cfg) {
  cfg.validate();
  const std::string out = cfg.output_dir;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + out + ": " + ec.message());
  auto at = [&](const char* name) { return (fs::path(out) / name).string(); };

  Clients clients;
  clients.translator = make_chat_client(*cfg.translator, "translator", cfg.template_dir);
  if (cfg.judge) clients.judge = make_chat_client(*cfg.judge, "judge", cfg.template_dir);
  if (cfg.generator) clients.generator = make_chat_client(*cfg.generator, "generator", cfg.template_dir);
  if (cfg.similarity) clients.similarity = make_similarity_client(*cfg.similarity);
  if (cfg.nli) clients.nli = make_nli_client(*cfg.nli);
  gateway::ResponseCache cache(cfg.cache_dir);

  std::vector<std::string> cond_names;
  for (Condition c : cfg.conditions) cond_names.emplace_back(conditions::to_string(c));
  const auto tdigest = template_dir_digest(cfg.template_dir);

  json header;
  header["tool"] = {{"name", "ctxnoise"}, {"version", kVersion}};
  header["seeds"] = {{"sample", cfg.seed}};
  header["settings"] = {{"conditions", cond_names},
                        {"sample_size", cfg.sample_size},
                        {"pairs", cfg.pairs},
                        {"translate", cfg.translate_params.to_json()},
                        {"judge", judge_options_json(cfg.judge_options)},
                        {"synth", synth_options_json(cfg.synth_options)},
                        {"template_dir_digest", tdigest}};
  header["models"] = {{"translator", endpoint_identity(cfg.translator)},
                      {"judge", endpoint_identity(cfg.judge)},
                      {"generator", endpoint_identity(cfg.generator)},
                      {"similarity", endpoint_identity(cfg.similarity)},
                      {"nli", endpoint_identity(cfg.nli)}};
  Ledger ledger(out, header);
  RunSummary summary;
  summary.output_dir = out;
  const size_t calls0 = clients.calls(), hits0 = cache.hits(), misses0 = cache.misses();

  auto stage = [&](const std::string& name, json inputs, const std::vector<std::string>& outputs, auto&& body) {
    inputs["version"] = kVersion;
    const auto digest = text::sha256_hex(json{{"stage", name}, {"inputs", inputs}}.dump());
    if (const json* prior = ledger.reusable(name, digest)) {
      ledger.add(*prior);
      summary.stages_reused.push_back(name);
      return;
    }
    const size_t c0 = clients.calls(), h0 = cache.hits(), m0 = cache.misses();
    auto record = [&](const std::string& status) {
      const size_t hits = cache.hits() - h0, misses = cache.misses() - m0;
      return json{{"name", name},
                  {"status", status},
                  {"input_digest", digest},
                  {"client_calls", clients.calls() - c0},
                  {"cache_hits", hits},
                  {"cache_misses", misses},
                  {"cache_hit_ratio", hit_ratio(hits, misses)}};
    };
    try {
      body();
    } catch (const std::exception& e) {
      auto s = record("failed");
      s["error"] = e.what();
      ledger.add(std::move(s));
      throw;
    }
    auto s = record("done");
    json files = json::object();
    for (const auto& f : outputs) files[f] = file_sha(at(f.c_str()));
    s["outputs"] = std::move(files);
    ledger.add(std::move(s));
    summary.stages_run.push_back(name);
  };

  // ingest
  {
    json sources = json::array();
    for (const auto& d : cfg.datasets) sources.push_back({{"sha256", file_sha(d.path)}, {"format", d.format}});
    stage("ingest", {{"sources", sources}, {"tiers", cfg.tiers}, {"pairs", cfg.pairs}},
          {"dataset.jsonl", "rejects.json"}, [&] {
            json rejects;
            const auto ds = load_datasets(cfg, &rejects);
            corpus::write_jsonl(at("dataset.jsonl"), ds);
            text::write_file_atomic(at("rejects.json"), rejects.dump(2) + "\n");
          });
  }

  stage("sample", {{"dataset", file_sha(at("dataset.jsonl"))}, {"n", cfg.sample_size}, {"seed", cfg.seed}},
        {"sample.jsonl"}, [&] {
          const auto ds = corpus::load(at("dataset.jsonl"));
          corpus::write_jsonl(at("sample.jsonl"), corpus::sample(ds, cfg.sample_size, cfg.seed));
        });

  const auto noise_templates = noise::NoiseTemplates::load(cfg.template_dir);
  stage("synth",
        {{"sample", file_sha(at("sample.jsonl"))},
         {"noise_file", cfg.noise_path ? file_sha(*cfg.noise_path) : ""},
         {"generator", endpoint_identity(cfg.generator)},
         {"templates", noise_templates.digest()},
         {"options", synth_options_json(cfg.synth_options)}},
        {"noise.jsonl"}, [&] {
          const auto ds = corpus::load(at("sample.jsonl"));
          noise::NoiseSets existing;
          if (cfg.noise_path) {
            for (auto& [id, set] : noise::load_jsonl(*cfg.noise_path))
              if (ds.find(id)) existing.emplace(id, std::move(set));
          }
          size_t missing = 0;
          for (const auto& inst : ds.instances()) {
            auto it = existing.find(inst.id);
            if (it == existing.end() || !it->second.complete()) ++missing;
          }
          if (missing > 0 && !clients.generator) {
            fail(ErrorKind::kConfig, std::to_string(missing) +
                                         " instances have no complete noise set and no generator is configured");
          }
          noise::NoiseSets sets = existing;
          if (missing > 0) {
            sets = noise::synthesize_all(ds, *clients.generator, cache, noise_templates, cfg.synth_options, existing);
          }
          for (const auto& inst : ds.instances()) noise::check_invariants(sets.at(inst.id), inst);
          noise::write_jsonl(at("noise.jsonl"), sets);
        });

  if (cfg.validate_noise) {
    stage("validate_noise",
          {{"sample", file_sha(at("sample.jsonl"))},
           {"noise", file_sha(at("noise.jsonl"))},
           {"similarity", endpoint_identity(cfg.similarity)},
           {"nli", endpoint_identity(cfg.nli)}},
          {"noise_validation.json", "noise_validation.txt"}, [&] {
            const auto ds = corpus::load(at("sample.jsonl"));
            const auto sets = noise::load_jsonl(at("noise.jsonl"));
            const auto report =
                noise::validate_noise(ds, sets, *clients.similarity, *clients.nli, {cfg.concurrency});
            text::write_file_atomic(at("noise_validation.json"), report.to_json().dump(2) + "\n");
            text::write_file_atomic(at("noise_validation.txt"), report.to_table());
          });
  }

  stage("expand",
        {{"sample", file_sha(at("sample.jsonl"))},
         {"noise", file_sha(at("noise.jsonl"))},
         {"conditions", cond_names},
         {"templates", tdigest}},
        {"tasks.jsonl"}, [&] {
          const auto ds = corpus::load(at("sample.jsonl"));
          const auto sets = noise::load_jsonl(at("noise.jsonl"));
          conditions::write_jsonl(at("tasks.jsonl"),
                                  conditions::expand_matrix(ds, cfg.conditions, sets, cfg.template_dir));
        });

  stage("translate",
        {{"tasks", file_sha(at("tasks.jsonl"))},
         {"translator", endpoint_identity(cfg.translator)},
         {"params", cfg.translate_params.to_json()}},
        {"translations.jsonl"}, [&] {
          const auto tasks = conditions::load_jsonl(at("tasks.jsonl"));
          std::vector<size_t> baseline, rest;
          for (size_t i = 0; i < tasks.size(); ++i) {
            (tasks[i].condition == Condition::kNone ? baseline : rest).push_back(i);
          }
          std::vector<gateway::TranslationRecord> records(tasks.size());
          for (const auto* batch : {&baseline, &rest}) {
            parallel_for(batch->size(), cfg.concurrency, [&](size_t k) {
              const size_t i = (*batch)[k];
              records[i] = gateway::translate(tasks[i], cfg.translate_params, *clients.translator, cache);
            });
          }
          gateway::write_records(at("translations.jsonl"), records);
        });

  if (cfg.judge_fidelity) {
    stage("judge_fidelity",
          {{"translations", file_sha(at("translations.jsonl"))},
           {"sample", file_sha(at("sample.jsonl"))},
           {"judge", endpoint_identity(cfg.judge)},
           {"options", judge_options_json(cfg.judge_options)},
           {"templates", tdigest}},
          {"fidelity.jsonl"}, [&] {
            const auto records = gateway::load_records(at("translations.jsonl"));
            const auto ds = corpus::load(at("sample.jsonl"));
            eval::JudgeOptions opts = cfg.judge_options;
            opts.template_dir = cfg.template_dir;
            eval::write_jsonl(at("fidelity.jsonl"), eval::judge_fidelity_all(records, ds, *clients.judge, cache, opts));
          });
  }

  if (cfg.judge_car) {
    stage("judge_car",
          {{"translations", file_sha(at("translations.jsonl"))},
           {"tasks", file_sha(at("tasks.jsonl"))},
           {"judge", endpoint_identity(cfg.judge)},
           {"options", judge_options_json(cfg.judge_options)},
           {"templates", tdigest}},
          {"car.jsonl"}, [&] {
            const auto records = gateway::load_records(at("translations.jsonl"));
            const auto tasks = conditions::load_jsonl(at("tasks.jsonl"));
            eval::JudgeOptions opts = cfg.judge_options;
            opts.template_dir = cfg.template_dir;
            eval::write_jsonl(at("car.jsonl"), eval::judge_car_all(records, tasks, *clients.judge, cache, opts));
          });
  }

  {
    std::vector<std::string> outputs;
    json inputs = {{"aux", cfg.aux_scores ? file_sha(*cfg.aux_scores) : ""}};
    if (cfg.judge_fidelity) {
      inputs["fidelity"] = file_sha(at("fidelity.jsonl"));
      outputs.insert(outputs.end(), {"aggregate.csv", "fidelity_table.txt"});
    }
    if (cfg.judge_car) {
      inputs["car"] = file_sha(at("car.jsonl"));
      outputs.insert(outputs.end(), {"car.csv", "car_table.txt"});
    }
    if (!outputs.empty()) {
      stage("aggregate", inputs, outputs, [&] {
        if (cfg.judge_fidelity) {
          const eval::CellScores aux = cfg.aux_scores ? eval::load_aux_scores(*cfg.aux_scores) : eval::CellScores{};
          const auto rows = eval::aggregate(eval::load_fidelity(at("fidelity.jsonl")), aux);
          text::write_file_atomic(at("aggregate.csv"), eval::format_csv(rows));
          text::write_file_atomic(at("fidelity_table.txt"), eval::format_table(rows));
        }
        if (cfg.judge_car) {
          const auto rates = eval::car_rates(eval::load_car(at("car.jsonl")));
          text::write_file_atomic(at("car.csv"), car_csv(rates));
          text::write_file_atomic(at("car_table.txt"), car_text(rates));
        }
      });
    }
  }

  summary.client_calls = clients.calls() - calls0;
  summary.cache_hits = cache.hits() - hits0;
  summary.cache_misses = cache.misses() - misses0;
  ledger.set("totals", {{"client_calls", summary.client_calls},
                        {"cache_hits", summary.cache_hits},
                        {"cache_misses", summary.cache_misses},
                        {"cache_hit_ratio", hit_ratio(summary.cache_hits, summary.cache_misses)},
                        {"stages_reused", summary.stages_reused}});
  ledger.save();
  return summary;
}

// ---- reports ---------------------------------------------------------------------

std::string_view to_string(ReportKind kind) {
  switch (kind) {
    case ReportKind::kFidelityTable: return "fidelity_table";
    case ReportKind::kCarBars: return "car_bars";
    case ReportKind::kAttentionShares: return "attention_shares";
    case ReportKind::kEntropyFidelity: return "entropy_fidelity";
    case ReportKind::kMitigationTable: return "mitigation_table";
  }
  return "fidelity_table";
}

ReportKind parse_report_kind(std::string_view name) {
  for (auto k : {ReportKind::kFidelityTable, ReportKind::kCarBars, ReportKind::kAttentionShares,
                 ReportKind::kEntropyFidelity, ReportKind::kMitigationTable}) {
    if (to_string(k) == name) return k;
  }
  fail(ErrorKind::kConfig, "unknown report kind: " + std::string(name));
}

const std::vector<std::pair<std::string, std::string>>& mitigation_strategies() {
  static const std::vector<std::pair<std::string, std::string>> kStrategies = {
      {"Baseline", "baseline"}, {"Vanilla", "vanilla"}, {"CDA", "cda"}, {"ALI", "ali"}, {"CK-PLUG", "ckplug"}};
  return kStrategies;
}

std::string format_text_table(const std::vector<std::string>& header,
                              const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> width(header.size(), 0);
  auto widen = [&](const std::vector<std::string>& line) {
    for (size_t c = 0; c < line.size() && c < width.size(); ++c)
      width[c] = std::max(width[c], text::display_width(line[c]));
  };
  widen(header);
  for (const auto& r : rows) widen(r);
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& line) {
    for (size_t c = 0; c < width.size(); ++c) {
      const std::string cell = c < line.size() ? line[c] : "";
      const std::string pad(width[c] - text::display_width(cell), ' ');
      if (c > 0) out << "  ";
      out << (c == 0 ? cell + pad : pad + cell);
    }
    out << "\n";
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  return out.str();
}

namespace {

std::vector<std::string> trace_files(const std::string& results, const ReportOptions& options,
                                     std::string_view kind) {
  if (!options.traces.empty()) {
    for (const auto& t : options.traces) require_artifact(std::string(kind), t);
    return options.traces;
  }
  const auto dir = fs::path(results) / "traces";
  std::vector<std::string> files;
  if (fs::is_directory(dir)) {
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    fail(ErrorKind::kValidation,
         std::string(kind) + " needs trace files: none were given and " + dir.string() + " holds no *.jsonl");
  }
  return files;
}

std::vector<trace::Trace> load_all_traces(const std::vector<std::string>& files) {
  std::vector<trace::Trace> all;
  for (const auto& f : files) {
    auto t = trace::load_traces(f);
    all.insert(all.end(), std::make_move_iterator(t.begin()), std::make_move_iterator(t.end()));
  }
  return all;
}

struct Written {
  std::vector<std::string> paths;
  void write(const std::string& path, const std::string& contents) {
    text::write_file_atomic(path, contents);
    paths.push_back(path);
  }
};

}  // namespace

std::vector<std::string> report(const std::string& results_dir, ReportKind kind, const ReportOptions& options) {
  const std::string name(to_string(kind));
  const auto out_dir = options.out_dir.value_or((fs::path(results_dir) / "reports").string());
  const auto in = [&](const std::string& f) { return (fs::path(results_dir) / f).string(); };
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + out_dir + ": " + ec.message());
  const auto csv_path = (fs::path(out_dir) / (name + ".csv")).string();
  const auto txt_path = (fs::path(out_dir) / (name + ".txt")).string();
  Written w;

  switch (kind) {
    case ReportKind::kFidelityTable: {
      std::vector<eval::AggregateRow> rows;
      eval::CellScores aux;
      if (options.aux) {
        require_artifact(name, *options.aux);
        aux = eval::load_aux_scores(*options.aux);
      }
      if (options.cells) {
        require_artifact(name, *options.cells);
        eval::CellScores fidelity, cell_aux;
        eval::load_cell_table(*options.cells, fidelity, cell_aux);
        for (const auto& [k, v] : aux) cell_aux[k] = v;
        rows = eval::aggregate_cells(fidelity, cell_aux);
      } else {
        require_artifact(name, in("fidelity.jsonl"));
        rows = eval::aggregate(eval::load_fidelity(in("fidelity.jsonl")), aux);
      }
      w.write(csv_path, eval::format_csv(rows));
      w.write(txt_path, eval::format_table(rows));
      break;
    }
    case ReportKind::kCarBars: {
      require_artifact(name, in("car.jsonl"));
      const auto rates = eval::car_rates(eval::load_car(in("car.jsonl")));
      if (rates.empty()) fail(ErrorKind::kValidation, name + ": " + in("car.jsonl") + " has no valid judgements");
      w.write(csv_path, car_csv(rates));
      w.write(txt_path, car_text(rates));
      break;
    }
    case ReportKind::kAttentionShares: {
      const auto summaries =
          trace::analyze(load_all_traces(trace_files(results_dir, options, name)), {}, options.concurrency);
      const auto by_cond = trace::allocation_by_condition(summaries);
      std::set<std::string> conds;
      for (const auto& kv : by_cond) conds.insert(kv.first);
      std::ostringstream csv_out;
      csv_out << "condition,idiom_share,context_share,other_share,tokens\n";
      for (const auto& c : ordered_conditions(conds)) {
        const auto& a = by_cond.at(c);
        csv_out << csv::format_row({c, fmt(a.idiom_share, 6), fmt(a.context_share, 6), fmt(a.other_share, 6),
                                    std::to_string(a.token_count)});
      }
      w.write(csv_path, csv_out.str());
      w.write(txt_path, trace::format_allocation_table(by_cond));
      break;
    }
    case ReportKind::kEntropyFidelity: {
      const auto files = trace_files(results_dir, options, name);
      require_artifact(name, in("fidelity.jsonl"));
      trace::FidelityIndex index;
      for (const auto& j : eval::load_fidelity(in("fidelity.jsonl")))
        if (j.valid) index[{j.instance_id, j.condition}] = j.score;
      const auto summaries = trace::analyze(load_all_traces(files), index, options.concurrency);
      const auto rows = trace::entropy_by_fidelity(summaries, options.condition);
      if (rows.empty()) {
        std::string list;
        for (const auto& f : files) list += (list.empty() ? "" : ", ") + f;
        fail(ErrorKind::kValidation, name + ": no " + options.condition +
                                         " trace has both a non-empty idiom span and a valid fidelity score; inputs: " +
                                         list + " and " + in("fidelity.jsonl"));
      }
      std::ostringstream csv_out;
      csv_out << "condition,fidelity,mean_entropy,spans\n";
      for (const auto& r : rows) {
        csv_out << csv::format_row(
                       {options.condition, std::to_string(r.fidelity), fmt(r.mean_entropy, 6), std::to_string(r.spans)});
      }
      w.write(csv_path, csv_out.str());
      w.write(txt_path, trace::format_entropy_table(rows));
      break;
    }
    case ReportKind::kMitigationTable: {
      struct StrategyData {
        std::string label;
        std::map<std::pair<std::string, std::string>, double> fidelity;  // (condition, pair)
        std::map<std::string, std::map<std::string, eval::CARRate>> car;
      };
      std::vector<StrategyData> data;
      std::set<std::string> pairs;
      const auto root = fs::path(results_dir) / "mitigation";
      for (const auto& [label, dir] : mitigation_strategies()) {
        auto base = root / dir;
        if (!fs::is_directory(base)) {
          // The main run doubles as the baseline.
          if (dir != "baseline" || !fs::exists(in("fidelity.jsonl"))) continue;
          base = fs::path(results_dir);
        }
        const auto fid = (base / "fidelity.jsonl").string();
        const auto car = (base / "car.jsonl").string();
        require_artifact(name, fid);
        require_artifact(name, car);
        StrategyData s{label, {}, eval::car_rates(eval::load_car(car))};
        for (const auto& row : eval::aggregate(eval::load_fidelity(fid))) {
          for (const auto& [p, v] : row.fidelity) {
            s.fidelity[{row.condition, p}] = v;
            pairs.insert(p);
          }
        }
        data.push_back(std::move(s));
      }
      if (data.empty()) {
        fail(ErrorKind::kValidation,
             name + " needs " + root.string() + "/<strategy>/{fidelity,car}.jsonl for at least one of "
                    "baseline, vanilla, cda, ali, ckplug");
      }
      std::vector<std::string> header{"pair", "strategy", "none F"};
      std::ostringstream csv_out;
      csv_out << "pair,strategy,none_fidelity";
      std::vector<std::string> ctx_conds;
      for (Condition c : conditions::kAllConditions) {
        if (c == Condition::kNone) continue;
        const std::string cn(conditions::to_string(c));
        ctx_conds.push_back(cn);
        header.push_back(cn + " F");
        header.push_back(cn + " CAR");
        csv_out << "," << cn << "_fidelity," << cn << "_car_percent";
      }
      csv_out << "\n";
      std::vector<std::vector<std::string>> rows;
      for (const auto& p : ordered_pairs(pairs)) {
        for (const auto& s : data) {
          auto f = [&](const std::string& c, bool text_cell) -> std::string {
            auto it = s.fidelity.find({c, p});
            if (it == s.fidelity.end()) return text_cell ? "-" : "";
            return fmt(it->second, text_cell ? 1 : 4);
          };
          auto car = [&](const std::string& c, bool text_cell) -> std::string {
            auto ci = s.car.find(c);
            if (ci == s.car.end() || !ci->second.count(p)) return text_cell ? "-" : "";
            const double pct = 100.0 * ci->second.at(p).rate();
            return text_cell ? fmt(pct, 0) + "%" : fmt(pct, 2);
          };
          std::vector<std::string> line{pair_label(p), s.label, f("none", true)};
          std::vector<std::string> cells{p, s.label, f("none", false)};
          for (const auto& c : ctx_conds) {
            line.push_back(f(c, true));
            line.push_back(car(c, true));
            cells.push_back(f(c, false));
            cells.push_back(car(c, false));
          }
          rows.push_back(std::move(line));
          csv_out << csv::format_row(cells);
        }
      }
      w.write(csv_path, csv_out.str());
      w.write(txt_path, format_text_table(header, rows));
      break;
    }
  }
  return w.paths;
}

}  // namespace ctxnoise::pipeline
