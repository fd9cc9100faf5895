// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "ctxnoise/client.hpp"

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "ctxnoise/error.hpp"
#include "ctxnoise/jsonl.hpp"
#include "ctxnoise/text.hpp"

namespace ctxnoise::gateway {

json DecodeParams::to_json() const {
  json j{{"greedy", greedy}, {"max_tokens", max_tokens}};
  if (!greedy) j["temperature"] = temperature;
  if (reasoning_mode) j["reasoning_mode"] = *reasoning_mode;
  return j;
}

DecodeParams DecodeParams::from_json(const json& j) {
  DecodeParams p;
  p.greedy = j.value("greedy", true);
  p.temperature = j.value("temperature", 0.0);
  p.max_tokens = j.value("max_tokens", 4096);
  if (j.contains("reasoning_mode") && !j["reasoning_mode"].is_null()) p.reasoning_mode = j["reasoning_mode"].get<bool>();
  if (p.temperature < 0.0) fail(ErrorKind::kConfig, "temperature must be >= 0");
  if (p.max_tokens <= 0) fail(ErrorKind::kConfig, "max_tokens must be positive");
  return p;
}

DecodeParams DecodeParams::greedy_decoding(int max_tokens) {
  DecodeParams p;
  p.max_tokens = max_tokens;
  return p;
}

DecodeParams DecodeParams::sampled(double temperature, int max_tokens) {
  DecodeParams p;
  p.greedy = false;
  p.temperature = temperature;
  p.max_tokens = max_tokens;
  return p;
}

std::string ChatRequest::prompt() const {
  std::string out;
  for (const auto& m : messages) {
    if (m.role != "user") continue;
    if (!out.empty()) out.push_back('\n');
    out += m.content;
  }
  return out;
}

std::chrono::milliseconds RetryPolicy::backoff(int attempt) const {
  double ms = static_cast<double>(initial_backoff.count());
  for (int i = 1; i < attempt; ++i) ms *= multiplier;
  return std::min(max_backoff, std::chrono::milliseconds(static_cast<long long>(ms)));
}

EndpointConfig EndpointConfig::from_json(const json& j, const std::string& role) {
  EndpointConfig c;
  c.kind = j.value("kind", std::string("http"));
  c.base_url = j.value("base_url", std::string());
  c.model_id = j.value("model_id", std::string());
  c.concurrency = j.value("concurrency", size_t{4});
  c.timeout_seconds = j.value("timeout_s", 120);
  c.system_prompt = j.value("system_prompt", std::string());
  if (j.contains("retry")) {
    const auto& r = j["retry"];
    c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
    c.retry.initial_backoff = std::chrono::milliseconds(r.value("initial_backoff_ms", 500));
    c.retry.multiplier = r.value("multiplier", 2.0);
    c.retry.max_backoff = std::chrono::milliseconds(r.value("max_backoff_ms", 8000));
  }
  std::string upper = role;
  for (auto& ch : upper) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  auto env = [&](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str()); v && *v) return std::string(v);
    return std::nullopt;
  };
  if (auto key_env = j.value("api_key_env", std::string()); !key_env.empty()) {
    if (auto v = env(key_env)) c.api_key = *v;
  }
  if (auto v = env("CTXNOISE_" + upper + "_BASE_URL")) c.base_url = *v;
  if (auto v = env("CTXNOISE_" + upper + "_MODEL")) c.model_id = *v;
  if (auto v = env("CTXNOISE_" + upper + "_API_KEY")) c.api_key = *v;
  if (c.kind != "http" && c.kind != "mock" && c.kind != "stub") {
    fail(ErrorKind::kConfig, role + ": unknown endpoint kind '" + c.kind + "'");
  }
  if (c.kind == "http" && c.base_url.empty()) fail(ErrorKind::kConfig, role + ": base_url is required");
  if (c.model_id.empty()) c.model_id = c.kind == "http" ? "" : c.kind + "-" + role;
  if (c.model_id.empty()) fail(ErrorKind::kConfig, role + ": model_id is required");
  return c;
}

void InFlightLimit::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return available_ > 0; });
  --available_;
}

void InFlightLimit::release() {
  {
    std::lock_guard lock(mu_);
    ++available_;
  }
  cv_.notify_one();
}

HttpChatClient::HttpChatClient(EndpointConfig config) : config_(std::move(config)), limit_(config_.concurrency) {}

json HttpChatClient::request_body(const ChatRequest& request) const {
  json messages = json::array();
  if (!config_.system_prompt.empty()) messages.push_back({{"role", "system"}, {"content", config_.system_prompt}});
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  json body{{"model", request.model_id.empty() ? config_.model_id : request.model_id},
            {"messages", messages},
            {"max_tokens", request.params.max_tokens},
            {"temperature", request.params.greedy ? 0.0 : request.params.temperature}};
  if (request.params.greedy) body["top_p"] = 1.0;
  if (request.top_logprobs) {
    body["logprobs"] = true;
    body["top_logprobs"] = *request.top_logprobs;
  }
  if (request.params.reasoning_mode) {
    body["chat_template_kwargs"] = {{"enable_thinking", *request.params.reasoning_mode}};
  }
  return body;
}

ChatResponse HttpChatClient::parse_response(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kUpstream, std::string("chat response is not JSON: ") + e.what());
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    fail(ErrorKind::kUpstream, "chat response has no choices");
  }
  const auto& choice = j["choices"][0];
  ChatResponse r;
  r.raw = body;
  if (choice.contains("message") && choice["message"].contains("content") && choice["message"]["content"].is_string()) {
    r.content = choice["message"]["content"].get<std::string>();
  } else if (choice.contains("text") && choice["text"].is_string()) {
    r.content = choice["text"].get<std::string>();
  } else {
    fail(ErrorKind::kUpstream, "chat response has no message content");
  }
  if (choice.contains("logprobs") && choice["logprobs"].is_object()) {
    const auto& lp = choice["logprobs"];
    if (lp.contains("content") && lp["content"].is_array()) {
      for (const auto& pos : lp["content"]) {
        std::vector<std::pair<std::string, double>> alts;
        for (const auto& alt : pos.value("top_logprobs", json::array())) {
          alts.emplace_back(alt.value("token", std::string()), alt.value("logprob", 0.0));
        }
        r.top_logprobs.push_back(std::move(alts));
      }
    } else if (lp.contains("top_logprobs") && lp["top_logprobs"].is_array()) {
      // legacy completions layout: list of {token: logprob}
      for (const auto& pos : lp["top_logprobs"]) {
        std::vector<std::pair<std::string, double>> alts;
        if (pos.is_object()) {
          for (const auto& [tok, val] : pos.items()) alts.emplace_back(tok, val.get<double>());
        }
        r.top_logprobs.push_back(std::move(alts));
      }
    }
  }
  return r;
}

namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

ParsedUrl split_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorKind::kConfig, "base_url must include a scheme: " + base_url);
  const auto path_start = base_url.find('/', scheme_end + 3);
  ParsedUrl u;
  u.scheme_host_port = base_url.substr(0, path_start);
  u.path_prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!u.path_prefix.empty() && u.path_prefix.back() == '/') u.path_prefix.pop_back();
  return u;
}

}  // namespace

ChatResponse HttpChatClient::complete(const ChatRequest& request) {
  const ParsedUrl url = split_url(config_.base_url);
  const std::string body = request_body(request).dump();
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, config_.retry.max_attempts); ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(config_.retry.backoff(attempt - 1));
    limit_.acquire();
    httplib::Result res{nullptr, httplib::Error::Unknown};
    {
      httplib::Client cli(url.scheme_host_port);
      cli.set_connection_timeout(std::chrono::seconds(config_.timeout_seconds));
      cli.set_read_timeout(std::chrono::seconds(config_.timeout_seconds));
      cli.set_write_timeout(std::chrono::seconds(config_.timeout_seconds));
      ++calls_;
      res = cli.Post(url.path_prefix + "/chat/completions", headers, body, "application/json");
    }
    limit_.release();
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      fail(ErrorKind::kUpstream, "chat endpoint returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    return parse_response(res->body);
  }
  fail(ErrorKind::kUpstream, "chat request failed after " + std::to_string(config_.retry.max_attempts) +
                                 " attempts: " + last_error);
}

json post_json(const EndpointConfig& config, const std::string& path, const json& body) {
  const ParsedUrl url = split_url(config.base_url);
  httplib::Headers headers;
  if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);
  const std::string payload = body.dump();
  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, config.retry.max_attempts); ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(config.retry.backoff(attempt - 1));
    httplib::Client cli(url.scheme_host_port);
    cli.set_connection_timeout(std::chrono::seconds(config.timeout_seconds));
    cli.set_read_timeout(std::chrono::seconds(config.timeout_seconds));
    auto res = cli.Post(url.path_prefix + path, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) fail(ErrorKind::kUpstream, "HTTP " + std::to_string(res->status) + " from " + config.base_url + path);
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      fail(ErrorKind::kUpstream, std::string("response is not JSON: ") + e.what());
    }
  }
  fail(ErrorKind::kUpstream, "request to " + config.base_url + path + " failed: " + last_error);
}

std::string cache_key(const ChatRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({m.role, m.content});
  json k{{"model", request.model_id},
         {"messages", messages},
         {"params", request.params.to_json()},
         {"salt", request.cache_salt}};
  if (request.top_logprobs) k["top_logprobs"] = *request.top_logprobs;
  return text::sha256_hex(k.dump());
}

ResponseCache::ResponseCache(std::optional<std::string> directory) {
  if (!directory) return;
  std::error_code ec;
  std::filesystem::create_directories(*directory, ec);
  if (ec) fail(ErrorKind::kIo, "cannot create cache directory " + *directory + ": " + ec.message());
  path_ = (std::filesystem::path(*directory) / "responses.jsonl").string();
  if (!std::filesystem::exists(*path_)) return;
  std::ifstream in(*path_);
  std::string line;
  size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (text::trim(line).empty()) continue;
    try {
      const json rec = json::parse(line);
      entries_[rec.at("key").get<std::string>()] = rec.at("value");
    } catch (const std::exception&) {
      // A torn final line from an interrupted run; the entry is refetched.
      std::cerr << "warning: skipping unreadable cache line " << *path_ << ":" << number << "\n";
    }
  }
}

std::optional<json> ResponseCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return std::optional<json>(std::in_place, it->second);
}

void ResponseCache::append_locked(const std::string& key, const json& value) {
  if (!path_) return;
  std::ofstream out(*path_, std::ios::app | std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot append to cache " + *path_);
  out << json{{"key", key}, {"value", value}}.dump() << '\n';
}

void ResponseCache::put(const std::string& key, const json& value) {
  std::lock_guard lock(mu_);
  entries_[key] = value;
  append_locked(key, value);
}

size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

std::pair<json, bool> ResponseCache::get_or_compute(const std::string& key, const std::function<json()>& compute) {
  std::promise<json> promise;
  {
    std::unique_lock lock(mu_);
    if (auto it = entries_.find(key); it != entries_.end()) {
      ++hits_;
      return {it->second, true};
    }
    if (auto it = in_flight_.find(key); it != in_flight_.end()) {
      auto fut = it->second;
      lock.unlock();
      ++hits_;
      return {fut.get(), true};
    }
    in_flight_.emplace(key, promise.get_future().share());
  }
  ++misses_;
  json value;
  try {
    value = compute();
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard lock(mu_);
    in_flight_.erase(key);
    throw;
  }
  {
    std::lock_guard lock(mu_);
    entries_[key] = value;
    append_locked(key, value);
    in_flight_.erase(key);
  }
  promise.set_value(value);
  return {value, false};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

CachedResponse complete_cached(ChatClient& client, ResponseCache& cache, const ChatRequest& request) {
  CachedResponse out;
  out.key = cache_key(request);
  auto [value, hit] = cache.get_or_compute(out.key, [&] {
    ChatResponse r = client.complete(request);
    json lp = json::array();
    for (const auto& pos : r.top_logprobs) {
      json alts = json::array();
      for (const auto& [tok, logprob] : pos) alts.push_back({tok, logprob});
      lp.push_back(alts);
    }
    return json{{"content", r.content}, {"raw", r.raw}, {"top_logprobs", lp}, {"timestamp", utc_timestamp()}};
  });
  out.hit = hit;
  out.response.content = value.value("content", std::string());
  out.response.raw = value.value("raw", std::string());
  for (const auto& pos : value.value("top_logprobs", json::array())) {
    std::vector<std::pair<std::string, double>> alts;
    for (const auto& alt : pos) alts.emplace_back(alt.at(0).get<std::string>(), alt.at(1).get<double>());
    out.response.top_logprobs.push_back(std::move(alts));
  }
  out.timestamp = value.value("timestamp", std::string());
  return out;
}

}  // namespace ctxnoise::gateway
