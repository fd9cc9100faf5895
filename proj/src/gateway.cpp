// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#include "ctxnoise/gateway.hpp"

#include <algorithm>
#include <cmath>

#include "ctxnoise/error.hpp"
#include "ctxnoise/jsonl.hpp"
#include "ctxnoise/numerics.hpp"
#include "ctxnoise/templates.hpp"
#include "ctxnoise/text.hpp"

namespace ctxnoise::gateway {

namespace {

constexpr std::string_view kOpen = "<translation>";
constexpr std::string_view kClose = "</translation>";

std::string regex_escape(const std::string& s) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

json TranslationRecord::to_json() const {
  return json{{"instance_id", instance_id},
              {"condition", condition},
              {"pair", pair_key},
              {"model_id", model_id},
              {"params", params.to_json()},
              {"output_translation", output_translation},
              {"reasoning", reasoning},
              {"raw_response", raw_response},
              {"cache_key", cache_key},
              {"timestamp", timestamp},
              {"unparsed", unparsed},
              {"partial", partial}};
}

TranslationRecord TranslationRecord::from_json(const json& j) {
  TranslationRecord r;
  r.instance_id = j.at("instance_id").get<std::string>();
  r.condition = j.at("condition").get<std::string>();
  r.pair_key = j.value("pair", std::string());
  r.model_id = j.at("model_id").get<std::string>();
  r.params = DecodeParams::from_json(j.at("params"));
  r.output_translation = j.at("output_translation").get<std::string>();
  r.reasoning = j.value("reasoning", std::string());
  r.raw_response = j.value("raw_response", std::string());
  r.cache_key = j.value("cache_key", std::string());
  r.timestamp = j.value("timestamp", std::string());
  r.unparsed = j.value("unparsed", false);
  r.partial = j.value("partial", false);
  return r;
}

Extraction extract_translation(const std::string& content) {
  Extraction e;
  const size_t close = content.rfind(kClose);
  if (close != std::string::npos) {
    const size_t open = content.rfind(kOpen, close);
    if (open != std::string::npos) {
      e.parsed = true;
      e.translation = text::trim(content.substr(open + kOpen.size(), close - open - kOpen.size()));
      e.reasoning = text::trim(content.substr(0, open) + content.substr(close + kClose.size()));
      return e;
    }
  }
  e.translation = text::trim(content);
  return e;
}

TranslationRecord translate(const conditions::TranslationTask& task, const DecodeParams& params, ChatClient& client,
                            ResponseCache& cache) {
  ChatRequest req;
  req.model_id = client.model_id();
  req.messages = {{"user", task.prompt}};
  req.params = params;
  req.purpose = "translate";
  req.vars = {{"instance_id", task.instance_id},
              {"condition", std::string(conditions::to_string(task.condition))},
              {"source_sentence", task.source_sentence},
              {"idiom", task.idiom_surface}};
  const CachedResponse out = complete_cached(client, cache, req);
  const Extraction ex = extract_translation(out.response.content);
  TranslationRecord r;
  r.instance_id = task.instance_id;
  r.condition = std::string(conditions::to_string(task.condition));
  r.pair_key = task.pair_key;
  r.model_id = req.model_id;
  r.params = params;
  r.output_translation = ex.translation;
  r.reasoning = ex.reasoning;
  r.raw_response = out.response.raw.empty() ? out.response.content : out.response.raw;
  r.cache_key = out.key;
  r.timestamp = out.timestamp;
  r.unparsed = !ex.parsed;
  r.cache_hit = out.hit;
  return r;
}

void write_records(const std::string& path, const std::vector<TranslationRecord>& records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(r.to_json());
  jsonl::write(path, rows);
}

std::vector<TranslationRecord> load_records(const std::string& path) {
  std::vector<TranslationRecord> out;
  for (const auto& line : jsonl::read(path)) {
    try {
      out.push_back(TranslationRecord::from_json(line.value));
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      fail(ErrorKind::kValidation, path + ":" + std::to_string(line.number) + ": " + e.what());
    }
  }
  return out;
}

// ---- MockTranslator ----------------------------------------------------------

MockTranslator::MockTranslator(std::string context_block_template, bool emit_reasoning, bool emit_delimiters)
    : emit_reasoning_(emit_reasoning), emit_delimiters_(emit_delimiters) {
  if (context_block_template.empty()) context_block_template = text::trim(templates::builtin("context_block"));
  std::string pattern = regex_escape(context_block_template);
  // Escaped slots look like \{idiom\}.
  auto replace = [&](const std::string& slot, const std::string& group) {
    const std::string escaped = "\\{" + slot + "\\}";
    const size_t pos = pattern.find(escaped);
    if (pos == std::string::npos) fail(ErrorKind::kConfig, "context block template lacks {" + slot + "}");
    pattern.replace(pos, escaped.size(), group);
  };
  replace("idiom", "[^\\n]*?");
  replace("context", "([^\\n]*)");
  context_re_ = std::regex(pattern);
}

std::string MockTranslator::translated(const std::string& source) { return "TR(" + source + ")"; }
std::string MockTranslator::literal(const std::string& idiom) { return "LIT(" + idiom + ")"; }

ChatResponse MockTranslator::complete(const ChatRequest& request) {
  ++calls_;
  auto src = request.vars.find("source_sentence");
  auto idiom = request.vars.find("idiom");
  if (src == request.vars.end() || idiom == request.vars.end()) {
    fail(ErrorKind::kUpstream, "mock translator needs source_sentence and idiom request vars");
  }
  const std::string prompt = request.prompt();
  std::smatch m;
  std::string meaning;
  if (std::regex_search(prompt, m, context_re_)) {
    meaning = text::trim(m[1].str());
  } else {
    meaning = literal(idiom->second);
  }
  const std::string translation = translated(src->second) + " with " + meaning;
  std::string content;
  if (emit_reasoning_) content += "The hint was considered.\n";
  content += emit_delimiters_ ? std::string(kOpen) + translation + std::string(kClose) : translation;
  ChatResponse r;
  r.content = content;
  r.raw = json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
  return r;
}

// ---- token distributions -----------------------------------------------------

TokenDistribution::TokenDistribution(std::map<std::string, double> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) fail(ErrorKind::kValidation, "empty token distribution");
  double sum = 0.0;
  for (const auto& [tok, p] : entries_) {
    if (!std::isfinite(p) || p < 0.0) fail(ErrorKind::kValidation, "invalid probability for token '" + tok + "'");
    sum += p;
  }
  if (std::abs(sum - 1.0) > numerics::kProbTolerance) {
    fail(ErrorKind::kValidation, "token probabilities sum to " + std::to_string(sum));
  }
}

double TokenDistribution::prob(const std::string& token) const {
  auto it = entries_.find(token);
  return it == entries_.end() ? 0.0 : it->second;
}

const std::string& TokenDistribution::argmax() const {
  if (entries_.empty()) fail(ErrorKind::kValidation, "argmax of an empty distribution");
  auto best = entries_.begin();
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

double TokenDistribution::entropy() const {
  std::vector<double> p;
  p.reserve(entries_.size());
  for (const auto& [tok, v] : entries_) p.push_back(v);
  return numerics::shannon_entropy(p);
}

TruncatedDistribution renormalize_top_k(const std::map<std::string, double>& probs, size_t k) {
  if (k == 0) fail(ErrorKind::kConfig, "top-k must be positive");
  std::vector<std::pair<std::string, double>> items(probs.begin(), probs.end());
  double total = 0.0;
  for (const auto& [tok, p] : items) {
    if (!std::isfinite(p) || p < 0.0) fail(ErrorKind::kUpstream, "invalid probability for token '" + tok + "'");
    total += p;
  }
  if (total > 1.0 + numerics::kProbTolerance) fail(ErrorKind::kUpstream, "probabilities exceed 1");
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (items.size() > k) items.resize(k);
  double kept = 0.0;
  for (const auto& [tok, p] : items) kept += p;
  if (kept <= 0.0) fail(ErrorKind::kUpstream, "top-k tokens carry no probability mass");
  std::map<std::string, double> out;
  for (const auto& [tok, p] : items) out[tok] = p / kept;
  // Division leaves rounding error; absorb it into the largest entry.
  double sum = 0.0;
  for (const auto& [tok, p] : out) sum += p;
  out[items.front().first] += 1.0 - sum;
  return {TokenDistribution(std::move(out)), std::max(0.0, 1.0 - kept)};
}

TruncatedDistribution from_logprobs(const std::vector<std::pair<std::string, double>>& alternatives, size_t k) {
  if (alternatives.empty()) fail(ErrorKind::kUpstream, "model returned no token distribution");
  std::map<std::string, double> probs;
  for (const auto& [tok, lp] : alternatives) {
    if (std::isnan(lp)) fail(ErrorKind::kUpstream, "NaN logprob for token '" + tok + "'");
    probs[tok] += std::exp(lp);
  }
  double total = 0.0;
  for (auto& [tok, p] : probs) total += p;
  // Servers round logprobs; tolerate a sliver above one.
  if (total > 1.0 && total < 1.0 + 1e-6) {
    for (auto& [tok, p] : probs) p /= total;
  }
  return renormalize_top_k(probs, k);
}

std::string StepModel::detokenize(const std::vector<std::string>& tokens) const { return text::join(tokens, " "); }

TokenDistribution next_token_distribution(StepModel& model, const std::vector<std::string>& prefix,
                                          const DualPrompt& prompts, PromptVariant variant) {
  return model.next_distribution(prompts[variant], prefix);
}

// ---- ToyLM -------------------------------------------------------------------

ToyLM ToyLM::from_json(const json& j) {
  ToyLM m;
  try {
    m.vocab_ = j.at("vocab").get<std::vector<std::string>>();
    m.end_token_ = j.at("end_token").get<std::string>();
    m.context_marker_ = j.at("context_marker").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("ToyLM fixture: ") + e.what());
  }
  if (m.vocab_.size() != 8) fail(ErrorKind::kConfig, "ToyLM vocabulary must have 8 tokens");
  if (std::find(m.vocab_.begin(), m.vocab_.end(), m.end_token_) == m.vocab_.end()) {
    fail(ErrorKind::kConfig, "ToyLM end token is not in the vocabulary");
  }
  if (m.context_marker_.empty()) fail(ErrorKind::kConfig, "ToyLM context_marker is empty");
  auto read_rows = [&](const char* name, std::map<std::string, TokenDistribution>& rows) {
    if (!j.contains(name)) fail(ErrorKind::kConfig, std::string("ToyLM fixture lacks ") + name);
    for (const auto& [prev, dist] : j.at(name).items()) {
      std::map<std::string, double> entries;
      for (const auto& [tok, p] : dist.items()) {
        if (std::find(m.vocab_.begin(), m.vocab_.end(), tok) == m.vocab_.end()) {
          fail(ErrorKind::kConfig, "ToyLM token outside the vocabulary: " + tok);
        }
        entries[tok] = p.get<double>();
      }
      try {
        rows.emplace(prev, TokenDistribution(std::move(entries)));
      } catch (const Error& e) {
        fail(ErrorKind::kConfig, std::string("ToyLM ") + name + " row '" + prev + "': " + e.what());
      }
    }
  };
  read_rows("base", m.base_);
  read_rows("context", m.context_);
  if (!m.base_.count("<s>")) fail(ErrorKind::kConfig, "ToyLM base has no <s> row");
  return m;
}

ToyLM ToyLM::load(const std::string& path) {
  try {
    return from_json(json::parse(text::read_file(path)));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kConfig, path + ": " + e.what());
  }
}

const TokenDistribution& ToyLM::row(bool with_context, const std::string& prev) const {
  if (with_context) {
    if (auto it = context_.find(prev); it != context_.end()) return it->second;
  }
  auto it = base_.find(prev);
  if (it == base_.end()) fail(ErrorKind::kUpstream, "ToyLM has no distribution after '" + prev + "'");
  return it->second;
}

TokenDistribution ToyLM::next_distribution(const std::string& prompt, const std::vector<std::string>& prefix) {
  const bool with_context = prompt.find(context_marker_) != std::string::npos;
  return row(with_context, prefix.empty() ? "<s>" : prefix.back());
}

// ---- CompletionsStepModel ----------------------------------------------------

CompletionsStepModel::CompletionsStepModel(EndpointConfig config, size_t top_k, std::string end_token)
    : config_(std::move(config)), top_k_(top_k), end_token_(std::move(end_token)) {
  if (config_.base_url.empty()) fail(ErrorKind::kConfig, "step model needs a base_url");
  if (top_k_ == 0) fail(ErrorKind::kConfig, "top-k must be positive");
}

std::string CompletionsStepModel::detokenize(const std::vector<std::string>& tokens) const {
  std::string out;
  for (const auto& t : tokens) out += t;
  return out;
}

TokenDistribution CompletionsStepModel::next_distribution(const std::string& prompt,
                                                          const std::vector<std::string>& prefix) {
  const json body{{"model", config_.model_id},   {"prompt", prompt + detokenize(prefix)},
                  {"max_tokens", 1},             {"temperature", 0},
                  {"logprobs", top_k_},          {"skip_special_tokens", false}};
  const json resp = post_json(config_, "/completions", body);
  std::vector<std::pair<std::string, double>> alts;
  try {
    const auto& choice = resp.at("choices").at(0);
    const auto& lp = choice.at("logprobs");
    if (lp.contains("top_logprobs") && !lp["top_logprobs"].empty()) {
      for (const auto& [tok, v] : lp["top_logprobs"].at(0).items()) alts.emplace_back(tok, v.get<double>());
    } else if (lp.contains("content") && !lp["content"].empty()) {
      for (const auto& alt : lp["content"].at(0).at("top_logprobs")) {
        alts.emplace_back(alt.at("token").get<std::string>(), alt.at("logprob").get<double>());
      }
    }
    if (alts.empty() && choice.value("finish_reason", std::string()) == "stop" &&
        choice.value("text", std::string()).empty()) {
      alts.emplace_back(end_token_, 0.0);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kUpstream, std::string("completions response lacks logprobs: ") + e.what());
  }
  if (alts.empty()) fail(ErrorKind::kUpstream, "completions endpoint returned no token distribution");
  auto t = from_logprobs(alts, top_k_);
  last_tail_mass_ = t.tail_mass;
  return t.distribution;
}

}  // namespace ctxnoise::gateway
