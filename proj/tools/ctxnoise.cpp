// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// ctxnoise command-line tool. Exit codes: 0 ok, 2 config, 3 upstream, 4 validation.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ctxnoise/ckplug.hpp"
#include "ctxnoise/conditions.hpp"
#include "ctxnoise/corpus.hpp"
#include "ctxnoise/csv.hpp"
#include "ctxnoise/error.hpp"
#include "ctxnoise/eval.hpp"
#include "ctxnoise/gateway.hpp"
#include "ctxnoise/jsonl.hpp"
#include "ctxnoise/mixgen.hpp"
#include "ctxnoise/noise.hpp"
#include "ctxnoise/pipeline.hpp"
#include "ctxnoise/text.hpp"
#include "ctxnoise/trace.hpp"

using namespace ctxnoise;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Endpoint flags for one role. Values from --config come first, flags win.
struct EndpointFlags {
  std::string role;
  std::string kind;
  std::string base_url;
  std::string model;

  void attach(CLI::App* app) {
    app->add_option("--" + role + "-kind", kind, role + " endpoint kind: http, mock or stub");
    app->add_option("--" + role + "-base-url", base_url, role + " endpoint base URL");
    app->add_option("--" + role + "-model", model, role + " model id");
  }

  bool given() const { return !kind.empty() || !base_url.empty() || !model.empty(); }

  std::optional<gateway::EndpointConfig> resolve(const json& config) const {
    json j = json::object();
    if (config.contains("endpoints") && config["endpoints"].contains(role)) j = config["endpoints"][role];
    else if (!given()) return std::nullopt;
    if (!kind.empty()) j["kind"] = kind;
    if (!base_url.empty()) j["base_url"] = base_url;
    if (!model.empty()) j["model_id"] = model;
    return gateway::EndpointConfig::from_json(j, role);
  }

  gateway::EndpointConfig require(const json& config) const {
    auto e = resolve(config);
    if (!e) fail(ErrorKind::kConfig, "no " + role + " endpoint: pass --" + role + "-kind or --config");
    return *e;
  }
};

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  if (!fs::exists(path)) fail(ErrorKind::kConfig, "config file does not exist: " + path);
  try {
    return json::parse(text::read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, path + ": " + e.what());
  }
}

std::optional<std::string> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

std::unique_ptr<gateway::ResponseCache> open_cache(const std::string& dir) {
  return std::make_unique<gateway::ResponseCache>(opt_path(dir));
}

void say(const std::string& s) { std::cout << s << (s.empty() || s.back() == '\n' ? "" : "\n"); }

std::vector<conditions::TranslationTask> tasks_with_context(const std::vector<conditions::TranslationTask>& all) {
  std::vector<conditions::TranslationTask> out;
  for (const auto& t : all)
    if (t.context_text) out.push_back(t);
  return out;
}

// item_id,score CSV.
std::map<std::string, double> read_item_scores(const std::string& path) {
  const auto rows = csv::parse(text::read_file(path));
  if (rows.empty() || rows[0].fields.size() < 2 || rows[0].fields[0] != "item_id" || rows[0].fields[1] != "score") {
    fail(ErrorKind::kValidation, path + ": expected a header item_id,score");
  }
  std::map<std::string, double> out;
  for (size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() < 2) fail(ErrorKind::kValidation, path + ":" + std::to_string(rows[i].line) + ": missing score");
    try {
      out[f[0]] = std::stod(f[1]);
    } catch (const std::exception&) {
      fail(ErrorKind::kValidation, path + ":" + std::to_string(rows[i].line) + ": bad score '" + f[1] + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context-noise experiments for retrieval-augmented idiom translation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pipeline::kVersion));

  // ---- ingest
  auto* ingest = app.add_subcommand("ingest", "Ingest idiom datasets into canonical JSONL");
  std::vector<std::string> ingest_inputs, ingest_tiers, ingest_pairs;
  std::string ingest_format = "jsonl", ingest_out, ingest_rejects;
  ingest->add_option("-i,--input", ingest_inputs, "Source file (repeatable)")->required()->check(CLI::ExistingFile);
  ingest->add_option("--format", ingest_format, "jsonl|csv|tsv[:field=column,...]");
  ingest->add_option("--tier", ingest_tiers, "Tier override, e.g. fi-en=medium (repeatable)");
  ingest->add_option("--pair", ingest_pairs, "Keep only these pair keys (repeatable)");
  ingest->add_option("-o,--out", ingest_out, "Canonical dataset JSONL")->required();
  ingest->add_option("--rejects", ingest_rejects, "Reject report JSON");

  // ---- sample
  auto* sample = app.add_subcommand("sample", "Seeded per-pair sample");
  std::string sample_in, sample_out;
  size_t sample_n = 200;
  uint64_t sample_seed = 0;
  sample->add_option("-d,--dataset", sample_in, "Canonical dataset JSONL")->required()->check(CLI::ExistingFile);
  sample->add_option("-n,--per-pair", sample_n, "Instances per language pair");
  sample->add_option("--seed", sample_seed, "Sampling seed");
  sample->add_option("-o,--out", sample_out, "Sample JSONL")->required();

  // ---- synth
  auto* synth = app.add_subcommand("synth", "Generate the four noise meanings per instance");
  std::string synth_in, synth_out, synth_existing, synth_config, synth_cache, synth_templates;
  noise::SynthOptions synth_opts;
  EndpointFlags synth_gen{"generator"};
  synth->add_option("-d,--dataset", synth_in, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  synth->add_option("-o,--out", synth_out, "Noise JSONL")->required();
  synth->add_option("--existing", synth_existing, "Keep complete sets from this noise JSONL")
      ->check(CLI::ExistingFile);
  synth->add_option("--config", synth_config, "Run config supplying endpoints");
  synth->add_option("--cache-dir", synth_cache, "Response cache directory");
  synth->add_option("--template-dir", synth_templates, "Prompt template overrides")->check(CLI::ExistingDirectory);
  synth->add_option("--meaning-language", synth_opts.meaning_language, "ISO code the meanings are written in");
  synth->add_option("--max-attempts", synth_opts.max_attempts, "Attempts per kind");
  synth->add_option("--concurrency", synth_opts.concurrency, "Parallel instances");
  synth_gen.attach(synth);

  // ---- validate-noise
  auto* vnoise = app.add_subcommand("validate-noise", "TER, similarity and contradiction checks on noise sets");
  std::string vn_dataset, vn_noise, vn_out, vn_config;
  size_t vn_concurrency = 4;
  EndpointFlags vn_sim{"similarity"}, vn_nli{"nli"};
  vnoise->add_option("-d,--dataset", vn_dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  vnoise->add_option("--noise", vn_noise, "Noise JSONL")->required()->check(CLI::ExistingFile);
  vnoise->add_option("-o,--out", vn_out, "Report JSON");
  vnoise->add_option("--config", vn_config, "Run config supplying endpoints");
  vnoise->add_option("--concurrency", vn_concurrency, "Parallel instances");
  vn_sim.attach(vnoise);
  vn_nli.attach(vnoise);

  // ---- run
  auto* runc = app.add_subcommand("run", "Full pipeline from a run config");
  std::string run_config, run_out, run_cache, run_conditions;
  std::optional<uint64_t> run_seed;
  std::optional<size_t> run_n;
  runc->add_option("-c,--config", run_config, "Run config JSON")->required();
  runc->add_option("--output-dir", run_out, "Override output_dir");
  runc->add_option("--cache-dir", run_cache, "Override cache_dir");
  runc->add_option("--seed", run_seed, "Override seed");
  runc->add_option("--sample-size", run_n, "Override sample_size");
  runc->add_option("--conditions", run_conditions, "Override conditions, e.g. none,gold or all");

  // ---- judge
  auto* judge = app.add_subcommand("judge", "Fidelity scores for translations");
  std::string jd_translations, jd_dataset, jd_out, jd_config, jd_cache, jd_templates, jd_aux;
  eval::JudgeOptions jd_opts;
  EndpointFlags jd_judge{"judge"};
  judge->add_option("--translations", jd_translations, "Translation records JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  judge->add_option("-d,--dataset", jd_dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  judge->add_option("-o,--out", jd_out, "Fidelity JSONL")->required();
  judge->add_option("--config", jd_config, "Run config supplying endpoints");
  judge->add_option("--cache-dir", jd_cache, "Response cache directory");
  judge->add_option("--template-dir", jd_templates, "Prompt template overrides")->check(CLI::ExistingDirectory);
  judge->add_option("--aux", jd_aux, "condition,pair,score CSV printed beside Fidelity")->check(CLI::ExistingFile);
  judge->add_option("--runs", jd_opts.runs, "Judge samples per item");
  judge->add_option("--temperature", jd_opts.temperature, "Judge sampling temperature");
  judge->add_flag("--include-reference", jd_opts.include_reference, "Show the judge the reference translation");
  judge->add_option("--concurrency", jd_opts.concurrency, "Parallel items");
  jd_judge.attach(judge);

  // ---- car
  auto* car = app.add_subcommand("car", "Context adoption against the no-context baseline");
  std::string car_translations, car_tasks, car_out, car_config, car_cache, car_templates;
  eval::JudgeOptions car_opts;
  EndpointFlags car_judge{"judge"};
  car->add_option("--translations", car_translations, "Translation records JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  car->add_option("--tasks", car_tasks, "Task JSONL")->required()->check(CLI::ExistingFile);
  car->add_option("-o,--out", car_out, "CAR JSONL")->required();
  car->add_option("--config", car_config, "Run config supplying endpoints");
  car->add_option("--cache-dir", car_cache, "Response cache directory");
  car->add_option("--template-dir", car_templates, "Prompt template overrides")->check(CLI::ExistingDirectory);
  car->add_option("--temperature", car_opts.car_temperature, "Judge temperature; 0 decodes greedily");
  car->add_option("--concurrency", car_opts.concurrency, "Parallel items");
  car_judge.attach(car);

  // ---- analyze-trace
  auto* atrace = app.add_subcommand("analyze-trace", "Attention allocation and idiom-span confidence");
  std::vector<std::string> at_traces;
  std::string at_fidelity, at_out, at_condition = "opposite";
  size_t at_concurrency = 4;
  atrace->add_option("-t,--traces", at_traces, "trace/v1 JSONL (repeatable)")->required()->check(CLI::ExistingFile);
  atrace->add_option("--fidelity", at_fidelity, "Fidelity JSONL to pair with span entropy")
      ->check(CLI::ExistingFile);
  atrace->add_option("--condition", at_condition, "Condition for the entropy-by-fidelity table");
  atrace->add_option("-o,--out", at_out, "Per-trace summary JSONL");
  atrace->add_option("--concurrency", at_concurrency, "Parallel traces");

  // ---- ckplug-decode
  auto* ck = app.add_subcommand("ckplug-decode", "Entropy-gated blended decoding");
  std::string ck_toylm, ck_prompt, ck_plain_prompt, ck_tasks, ck_out, ck_steps, ck_config;
  double ck_alpha = 0.5;
  int ck_max_tokens = 64;
  size_t ck_top_k = 20;
  bool ck_baseline = false;
  EndpointFlags ck_decoder{"decoder"};
  ck->add_option("--toylm", ck_toylm, "Bigram toy model JSON")->check(CLI::ExistingFile);
  ck->add_option("--prompt", ck_prompt, "Prompt with the retrieved context");
  ck->add_option("--no-context-prompt", ck_plain_prompt, "The same prompt without context");
  ck->add_option("--tasks", ck_tasks, "Decode every task with context against its none task")
      ->check(CLI::ExistingFile);
  ck->add_option("--alpha", ck_alpha, "Weight of the context-aware distribution");
  ck->add_option("--max-tokens", ck_max_tokens, "Decode length cap");
  ck->add_option("--top-k", ck_top_k, "Logprob alternatives per step (completions endpoint)");
  ck->add_option("-o,--out", ck_out, "Translation records JSONL");
  ck->add_option("--steps", ck_steps, "Per-step CG/branch log JSONL");
  ck->add_option("--config", ck_config, "Run config supplying the decoder endpoint");
  ck->add_flag("--baseline", ck_baseline, "Also print plain greedy decodes of both prompts");
  ck_decoder.attach(ck);

  // ---- mix
  auto* mix = app.add_subcommand("mix", "Fine-tuning data mixes and manifests");
  std::string mix_dataset, mix_noise, mix_strategy = "all", mix_out, mix_templates;
  uint64_t mix_seed = 0;
  mixgen::Hyperparameters mix_hp;
  mix->add_option("-d,--dataset", mix_dataset, "Training split JSONL")->required()->check(CLI::ExistingFile);
  mix->add_option("--noise", mix_noise, "Noise JSONL")->required()->check(CLI::ExistingFile);
  mix->add_option("--strategy", mix_strategy, "vanilla, ali, cda or all");
  mix->add_option("--seed", mix_seed, "Shuffle seed");
  mix->add_option("-o,--out-dir", mix_out, "Writes <out>/<strategy>/{train.jsonl,manifest.json}")->required();
  mix->add_option("--template-dir", mix_templates, "Prompt template overrides")->check(CLI::ExistingDirectory);
  mix->add_option("--epochs", mix_hp.epochs, "Training epochs recorded in the manifest");
  mix->add_option("--lora-rank", mix_hp.lora_rank, "LoRA rank");
  mix->add_option("--lora-alpha", mix_hp.lora_alpha, "LoRA alpha");
  mix->add_option("--batch-size", mix_hp.batch_size, "Batch size");
  mix->add_option("--lr", mix_hp.learning_rate, "Learning rate");

  // ---- report
  auto* rep = app.add_subcommand("report", "Tables and plot data from a results directory");
  std::string rep_results, rep_kind, rep_cells, rep_aux, rep_out;
  pipeline::ReportOptions rep_opts;
  rep->add_option("-r,--results", rep_results, "Results directory")->required();
  rep->add_option("-k,--kind", rep_kind,
                  "fidelity_table, car_bars, attention_shares, entropy_fidelity or mitigation_table")
      ->required();
  rep->add_option("-t,--traces", rep_opts.traces, "trace/v1 JSONL (default <results>/traces/*.jsonl)");
  rep->add_option("--cells", rep_cells, "condition,pair,fidelity[,comet] CSV instead of fidelity.jsonl");
  rep->add_option("--aux", rep_aux, "condition,pair,score CSV");
  rep->add_option("--condition", rep_opts.condition, "Condition for entropy_fidelity");
  rep->add_option("--out-dir", rep_out, "Output directory (default <results>/reports)");

  // ---- correlate
  auto* corr = app.add_subcommand("correlate", "Agreement between automatic scores and human ratings");
  std::string corr_human, corr_auto, corr_metric = "fidelity";
  bool corr_by_pair = false;
  corr->add_option("--human", corr_human, "item_id,annotator_id,rating CSV")->required()->check(CLI::ExistingFile);
  corr->add_option("--auto", corr_auto, "Fidelity JSONL (item id <instance>:<condition>) or item_id,score CSV")
      ->required()
      ->check(CLI::ExistingFile);
  corr->add_option("--metric", corr_metric, "Label for the automatic metric");
  corr->add_flag("--by-pair", corr_by_pair, "Also report each language pair (fidelity JSONL input only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) {
      pipeline::RunConfig cfg;
      for (const auto& p : ingest_inputs) cfg.datasets.push_back({p, ingest_format});
      for (const auto& t : ingest_tiers) {
        const auto eq = t.find('=');
        if (eq == std::string::npos) fail(ErrorKind::kConfig, "--tier expects pair=tier, got " + t);
        cfg.tiers[t.substr(0, eq)] = t.substr(eq + 1);
      }
      cfg.pairs = ingest_pairs;
      json rejects;
      const auto ds = pipeline::load_datasets(cfg, &rejects);
      corpus::write_jsonl(ingest_out, ds);
      if (!ingest_rejects.empty()) text::write_file_atomic(ingest_rejects, rejects.dump(2) + "\n");
      size_t rejected = 0;
      for (const auto& r : rejects) rejected += r["rejects"].size();
      say("accepted " + std::to_string(ds.size()) + ", rejected " + std::to_string(rejected));
      for (const auto& r : rejects)
        for (const auto& w : r["warnings"]) std::cerr << "warning: " << w.get<std::string>() << "\n";
    } else if (*sample) {
      const auto out = corpus::sample(corpus::load(sample_in), sample_n, sample_seed);
      corpus::write_jsonl(sample_out, out);
      for (const auto& p : out.pairs()) {
        size_t n = 0;
        for (const auto& i : out.instances()) n += i.pair == p ? 1 : 0;
        say(p.key() + " " + std::to_string(n));
      }
    } else if (*synth) {
      const auto config = read_config(synth_config);
      const auto gen = pipeline::make_chat_client(synth_gen.require(config), "generator", opt_path(synth_templates));
      auto cache = open_cache(synth_cache);
      const auto ds = corpus::load(synth_in);
      const auto existing = synth_existing.empty() ? noise::NoiseSets{} : noise::load_jsonl(synth_existing);
      const auto sets = noise::synthesize_all(ds, *gen, *cache, noise::NoiseTemplates::load(opt_path(synth_templates)),
                                              synth_opts, existing);
      noise::write_jsonl(synth_out, sets);
      say("noise sets " + std::to_string(sets.size()) + ", generator calls " + std::to_string(gen->calls()));
    } else if (*vnoise) {
      const auto config = read_config(vn_config);
      auto sim = pipeline::make_similarity_client(vn_sim.require(config));
      auto nli = pipeline::make_nli_client(vn_nli.require(config));
      const auto report = noise::validate_noise(corpus::load(vn_dataset), noise::load_jsonl(vn_noise), *sim, *nli,
                                                {vn_concurrency});
      if (!vn_out.empty()) text::write_file_atomic(vn_out, report.to_json().dump(2) + "\n");
      say(report.to_table());
    } else if (*runc) {
      auto j = read_config(run_config);
      if (!run_out.empty()) j["output_dir"] = fs::absolute(run_out).string();
      if (!run_cache.empty()) j["cache_dir"] = fs::absolute(run_cache).string();
      if (run_seed) j["seed"] = *run_seed;
      if (run_n) j["sample_size"] = *run_n;
      if (!run_conditions.empty()) j["conditions"] = run_conditions;
      const auto cfg = pipeline::RunConfig::from_json(j, fs::absolute(run_config).parent_path().string());
      const auto s = pipeline::run(cfg);
      say("results in " + s.output_dir);
      say("stages run: " + text::join(s.stages_run, ", "));
      if (!s.stages_reused.empty()) say("stages reused: " + text::join(s.stages_reused, ", "));
      say("client calls " + std::to_string(s.client_calls) + ", cache hits " + std::to_string(s.cache_hits) +
          ", misses " + std::to_string(s.cache_misses));
      const auto table = fs::path(s.output_dir) / "fidelity_table.txt";
      if (fs::exists(table)) say(text::read_file(table.string()));
    } else if (*judge) {
      const auto config = read_config(jd_config);
      auto client = pipeline::make_chat_client(jd_judge.require(config), "judge", opt_path(jd_templates));
      auto cache = open_cache(jd_cache);
      jd_opts.template_dir = opt_path(jd_templates);
      const auto js = eval::judge_fidelity_all(gateway::load_records(jd_translations), corpus::load(jd_dataset),
                                               *client, *cache, jd_opts);
      eval::write_jsonl(jd_out, js);
      const auto aux = jd_aux.empty() ? eval::CellScores{} : eval::load_aux_scores(jd_aux);
      say(eval::format_table(eval::aggregate(js, aux)));
    } else if (*car) {
      const auto config = read_config(car_config);
      auto client = pipeline::make_chat_client(car_judge.require(config), "judge", opt_path(car_templates));
      auto cache = open_cache(car_cache);
      car_opts.template_dir = opt_path(car_templates);
      const auto js = eval::judge_car_all(gateway::load_records(car_translations), conditions::load_jsonl(car_tasks),
                                          *client, *cache, car_opts);
      eval::write_jsonl(car_out, js);
      say(pipeline::format_car_table(eval::car_rates(js)));
    } else if (*atrace) {
      std::vector<trace::Trace> traces;
      for (const auto& f : at_traces) {
        auto t = trace::load_traces(f);
        traces.insert(traces.end(), t.begin(), t.end());
      }
      trace::FidelityIndex index;
      if (!at_fidelity.empty()) {
        for (const auto& f : eval::load_fidelity(at_fidelity))
          if (f.valid) index[{f.instance_id, f.condition}] = f.score;
      }
      const auto summaries = trace::analyze(traces, index, at_concurrency);
      if (!at_out.empty()) {
        std::vector<json> rows;
        for (const auto& s : summaries) rows.push_back(s.to_json());
        jsonl::write(at_out, rows);
      }
      say(trace::format_allocation_table(trace::allocation_by_condition(summaries)));
      size_t empty = 0;
      for (const auto& s : summaries) empty += s.alignment.empty ? 1 : 0;
      say("traces " + std::to_string(summaries.size()) + ", without an idiom span " + std::to_string(empty));
      if (!index.empty()) say(trace::format_entropy_table(trace::entropy_by_fidelity(summaries, at_condition)));
    } else if (*ck) {
      const auto config = read_config(ck_config);
      std::unique_ptr<gateway::StepModel> model;
      if (!ck_toylm.empty()) {
        model = std::make_unique<gateway::ToyLM>(gateway::ToyLM::load(ck_toylm));
      } else {
        model = std::make_unique<gateway::CompletionsStepModel>(ck_decoder.require(config), ck_top_k);
      }
      ckplug::BlendConfig blend{ck_alpha};
      blend.validate();
      const auto params = gateway::DecodeParams::greedy_decoding(ck_max_tokens);

      std::vector<std::pair<conditions::TranslationTask, gateway::DualPrompt>> jobs;
      if (!ck_tasks.empty()) {
        const auto all = conditions::load_jsonl(ck_tasks);
        std::map<std::string, std::string> plain;
        for (const auto& t : all)
          if (!t.context_text) plain[t.instance_id] = t.prompt;
        for (const auto& t : tasks_with_context(all)) {
          auto it = plain.find(t.instance_id);
          if (it == plain.end()) fail(ErrorKind::kValidation, "no none task for " + t.instance_id);
          jobs.push_back({t, {t.prompt, it->second}});
        }
      } else {
        if (ck_prompt.empty() || ck_plain_prompt.empty()) {
          fail(ErrorKind::kConfig, "pass --tasks, or both --prompt and --no-context-prompt");
        }
        conditions::TranslationTask t;
        t.instance_id = "prompt";
        t.condition = conditions::Condition::kGold;
        jobs.push_back({t, {ck_prompt, ck_plain_prompt}});
      }

      std::vector<gateway::TranslationRecord> records;
      std::vector<json> step_rows;
      for (const auto& [task, prompts] : jobs) {
        auto r = ckplug::decode_with_ckplug(*model, prompts, params, blend);
        r.record.instance_id = task.instance_id;
        r.record.condition = std::string(conditions::to_string(task.condition));
        r.record.pair_key = task.pair_key;
        for (const auto& s : r.steps) {
          auto row = s.to_json();
          row["instance_id"] = task.instance_id;
          row["condition"] = r.record.condition;
          step_rows.push_back(std::move(row));
        }
        say(task.instance_id + " " + r.record.condition + ": " + r.record.output_translation +
            (r.record.partial ? "  [partial]" : ""));
        if (ck_baseline) {
          say("  greedy with context:    " +
              ckplug::decode_greedy(*model, prompts.with_context, params).record.output_translation);
          say("  greedy without context: " +
              ckplug::decode_greedy(*model, prompts.without_context, params).record.output_translation);
        }
        records.push_back(std::move(r.record));
      }
      if (!ck_out.empty()) gateway::write_records(ck_out, records);
      if (!ck_steps.empty()) jsonl::write(ck_steps, step_rows);
    } else if (*mix) {
      const auto ds = corpus::load(mix_dataset);
      const auto sets = noise::load_jsonl(mix_noise);
      std::vector<mixgen::Strategy> strategies;
      if (mix_strategy == "all") {
        strategies = {mixgen::Strategy::kVanilla, mixgen::Strategy::kAli, mixgen::Strategy::kCda};
      } else {
        strategies = {mixgen::parse_strategy(mix_strategy)};
      }
      for (auto s : strategies) {
        const auto examples = mixgen::build_mix(ds, sets, s, mix_seed, opt_path(mix_templates));
        const auto dir = (fs::path(mix_out) / std::string(mixgen::to_string(s))).string();
        const auto emitted = mixgen::emit_manifest(s, examples, dir, mix_seed, mix_hp);
        say(std::string(mixgen::to_string(s)) + ": " + std::to_string(examples.size()) + " examples -> " +
            emitted.train_path);
      }
    } else if (*rep) {
      if (!rep_cells.empty()) rep_opts.cells = rep_cells;
      if (!rep_aux.empty()) rep_opts.aux = rep_aux;
      if (!rep_out.empty()) rep_opts.out_dir = rep_out;
      const auto files = pipeline::report(rep_results, pipeline::parse_report_kind(rep_kind), rep_opts);
      for (const auto& f : files) {
        if (fs::path(f).extension() == ".txt") say(text::read_file(f));
      }
      for (const auto& f : files) std::cerr << "wrote " << f << "\n";
    } else if (*corr) {
      const auto human = eval::load_human_ratings(corr_human);
      std::map<std::string, double> automatic;
      std::map<std::string, std::string> pair_of;
      if (fs::path(corr_auto).extension() == ".jsonl") {
        for (const auto& f : eval::load_fidelity(corr_auto)) {
          if (!f.valid) continue;
          const auto id = f.instance_id + ":" + f.condition;
          automatic[id] = f.score;
          pair_of[id] = f.pair_key;
        }
      } else {
        automatic = read_item_scores(corr_auto);
      }
      std::vector<eval::CorrelationRow> rows;
      rows.push_back({corr_metric, "all", eval::correlate_with_humans(automatic, human), automatic.size()});
      if (corr_by_pair) {
        std::set<std::string> pairs;
        for (const auto& kv : pair_of) pairs.insert(kv.second);
        for (const auto& p : pairs) {
          std::map<std::string, double> a, h;
          for (const auto& [id, v] : automatic) {
            if (pair_of[id] != p) continue;
            a[id] = v;
            if (auto it = human.find(id); it != human.end()) h[id] = it->second;
          }
          rows.push_back({corr_metric, p, eval::correlate_with_humans(a, h), a.size()});
        }
      }
      say(eval::format_correlations(rows));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
