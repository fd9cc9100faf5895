// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0
//
// Text-generation clients. ChatClient is the seam every model-facing module
// goes through: HttpChatClient speaks the open chat-completions wire format,
// and the offline doubles in gateway.hpp implement the same interface.

#pragma once

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ctxnoise::gateway {

using nlohmann::json;

struct DecodeParams {
  bool greedy = true;
  double temperature = 0.0;  // ignored when greedy
  int max_tokens = 4096;
  std::optional<bool> reasoning_mode;  // forwarded as enable_thinking when set

  /// Canonical form used in cache keys; temperature is dropped under greedy.
  json to_json() const;
  static DecodeParams from_json(const json& j);

  static DecodeParams greedy_decoding(int max_tokens = 4096);
  static DecodeParams sampled(double temperature, int max_tokens = 512);
};

struct ChatMessage {
  std::string role;
  std::string content;
};

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  DecodeParams params;
  std::optional<int> top_logprobs;
  // Distinguishes otherwise identical requests (e.g. the k-th judge sample).
  std::string cache_salt;
  // Local-only metadata for offline doubles; never sent over the wire and not
  // part of the cache key.
  std::string purpose;
  std::map<std::string, std::string> vars;

  /// Concatenated user-message text.
  std::string prompt() const;
};

struct ChatResponse {
  std::string content;
  std::string raw;  // full response body (or a synthetic one for doubles)
  // Per generated position: (token, logprob) alternatives, when requested.
  std::vector<std::vector<std::pair<std::string, double>>> top_logprobs;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
  virtual std::string model_id() const = 0;
  /// Number of requests that reached the backend.
  virtual size_t calls() const { return 0; }
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};

  std::chrono::milliseconds backoff(int attempt) const;
};

struct EndpointConfig {
  std::string kind = "http";  // http | mock | stub
  std::string base_url;       // e.g. http://localhost:8000/v1
  std::string model_id;
  std::string api_key;
  size_t concurrency = 4;
  RetryPolicy retry;
  int timeout_seconds = 120;
  std::string system_prompt;

  /// Reads {kind, base_url, model_id, api_key_env, concurrency, retry:{...},
  /// timeout_s, system_prompt}. CTXNOISE_<ROLE>_{BASE_URL,MODEL,API_KEY}
  /// environment variables override the file.
  static EndpointConfig from_json(const json& j, const std::string& role);
};

/// Counting semaphore bounding in-flight requests.
class InFlightLimit {
 public:
  explicit InFlightLimit(size_t cap) : available_(cap == 0 ? 1 : cap) {}
  void acquire();
  void release();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  size_t available_;
};

class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(EndpointConfig config);

  ChatResponse complete(const ChatRequest& request) override;
  std::string model_id() const override { return config_.model_id; }
  size_t calls() const override { return calls_.load(); }

  /// The JSON body sent for a request.
  json request_body(const ChatRequest& request) const;
  /// Parses a chat-completions response body.
  static ChatResponse parse_response(const std::string& body);

 private:
  EndpointConfig config_;
  InFlightLimit limit_;
  std::atomic<size_t> calls_{0};
};

/// POST a JSON body to base_url + path with the endpoint's retry policy.
/// Transport errors, 429 and 5xx are retried; other failures throw kUpstream.
json post_json(const EndpointConfig& config, const std::string& path, const json& body);

/// Digest of (model_id, prompt messages, decode params, salt).
std::string cache_key(const ChatRequest& request);

/// Append-only JSONL response store with an in-memory index. Concurrent
/// requests for one key trigger exactly one computation.
class ResponseCache {
 public:
  /// No directory: memory only.
  explicit ResponseCache(std::optional<std::string> directory = std::nullopt);

  std::optional<json> get(const std::string& key) const;
  void put(const std::string& key, const json& value);

  /// Returns the stored value and whether it was served without computing.
  std::pair<json, bool> get_or_compute(const std::string& key, const std::function<json()>& compute);

  size_t hits() const { return hits_.load(); }
  size_t misses() const { return misses_.load(); }
  size_t size() const;
  const std::optional<std::string>& path() const { return path_; }

 private:
  void append_locked(const std::string& key, const json& value);

  std::optional<std::string> path_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, json> entries_;
  std::unordered_map<std::string, std::shared_future<json>> in_flight_;
  std::atomic<size_t> hits_{0};
  std::atomic<size_t> misses_{0};
};

struct CachedResponse {
  ChatResponse response;
  std::string key;
  std::string timestamp;  // time of the original fetch
  bool hit = false;
};

/// Consults the cache before calling the client; stores content, raw body and
/// fetch time.
CachedResponse complete_cached(ChatClient& client, ResponseCache& cache, const ChatRequest& request);

std::string utc_timestamp();

}  // namespace ctxnoise::gateway
