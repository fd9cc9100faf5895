// Copyright 2026 The ctxnoise Authors
// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <thread>

#include "ctxnoise/error.hpp"
#include "ctxnoise/gateway.hpp"
#include "ctxnoise/parallel.hpp"
#include "ctxnoise/text.hpp"

using namespace ctxnoise;
using namespace ctxnoise::gateway;
using conditions::Condition;

namespace {

const std::string kFixtures = CTXNOISE_FIXTURES;
const std::string kData = CTXNOISE_DATA;

corpus::Dataset fixture() {
  return corpus::ingest(kFixtures + "/corpus_ok.jsonl", corpus::SourceFormat::parse("jsonl"));
}

std::vector<conditions::TranslationTask> tasks_for(const corpus::Dataset& ds, std::vector<Condition> conds) {
  noise::OfflineNoiseGenerator gen;
  ResponseCache cache;
  return conditions::expand_matrix(ds, conds, noise::synthesize_all(ds, gen, cache, noise::NoiseTemplates::load()));
}

// Runs an httplib server on an ephemeral port for the lifetime of the object.
class LocalServer {
 public:
  LocalServer() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  httplib::Server& server() { return server_; }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

EndpointConfig fast_config(const std::string& base_url) {
  EndpointConfig c;
  c.base_url = base_url;
  c.model_id = "m";
  c.api_key = "secret";
  c.retry.initial_backoff = std::chrono::milliseconds(1);
  c.retry.max_backoff = std::chrono::milliseconds(2);
  c.timeout_seconds = 5;
  return c;
}

}  // namespace

TEST_CASE("delimiter extraction") {
  auto e = extract_translation("thinking...\n<translation> Hello </translation>\n");
  CHECK(e.parsed);
  CHECK(e.translation == "Hello");
  CHECK(e.reasoning == "thinking...");
  e = extract_translation("<translation>draft</translation> then <translation>final</translation>");
  CHECK(e.translation == "final");
  e = extract_translation("  no tags here ");
  CHECK_FALSE(e.parsed);
  CHECK(e.translation == "no tags here");
}

TEST_CASE("mock translator follows its contract") {
  const auto ds = fixture();
  const auto tasks = tasks_for(ds, {Condition::kNone, Condition::kGold, Condition::kOpposite});
  MockTranslator mock;
  ResponseCache cache;
  const auto& inst = ds.at("fi-0001");
  const auto none = translate(tasks[0], DecodeParams::greedy_decoding(), mock, cache);
  CHECK(none.output_translation ==
        MockTranslator::translated(inst.source_sentence) + " with " + MockTranslator::literal(inst.idiom_surface));
  const auto gold = translate(tasks[1], DecodeParams::greedy_decoding(), mock, cache);
  CHECK(gold.output_translation == MockTranslator::translated(inst.source_sentence) + " with down the drain");
  CHECK_FALSE(gold.unparsed);
  const auto opp = translate(tasks[2], DecodeParams::greedy_decoding(), mock, cache);
  CHECK(opp.output_translation == MockTranslator::translated(inst.source_sentence) + " with " + *tasks[2].context_text);
}

TEST_CASE("second identical translation is a byte-identical cache hit") {
  const auto ds = fixture();
  const auto tasks = tasks_for(ds, {Condition::kGold});
  MockTranslator mock;
  ResponseCache cache;
  const auto a = translate(tasks[0], DecodeParams::greedy_decoding(), mock, cache);
  const auto b = translate(tasks[0], DecodeParams::greedy_decoding(), mock, cache);
  CHECK_FALSE(a.cache_hit);
  CHECK(b.cache_hit);
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(mock.calls() == 1);
  const auto c = translate(tasks[0], DecodeParams::sampled(0.7), mock, cache);
  CHECK_FALSE(c.cache_hit);
  CHECK(c.cache_key != a.cache_key);
}

TEST_CASE("persistent cache serves a fresh process without calls") {
  const auto dir = std::filesystem::temp_directory_path() / "ctxnoise_gateway_cache";
  std::filesystem::remove_all(dir);
  const auto ds = fixture();
  const auto tasks = tasks_for(ds, {Condition::kNone, Condition::kLiteral});
  std::vector<std::string> first;
  {
    MockTranslator mock;
    ResponseCache cache(dir.string());
    for (const auto& t : tasks) first.push_back(translate(t, DecodeParams::greedy_decoding(), mock, cache).to_json().dump());
  }
  MockTranslator mock;
  ResponseCache cache(dir.string());
  for (size_t i = 0; i < tasks.size(); ++i) {
    CHECK(translate(tasks[i], DecodeParams::greedy_decoding(), mock, cache).to_json().dump() == first[i]);
  }
  CHECK(mock.calls() == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("concurrent identical requests fetch once") {
  const auto ds = fixture();
  const auto tasks = tasks_for(ds, {Condition::kGold});
  MockTranslator mock;
  ResponseCache cache;
  parallel_for(32, 8, [&](size_t) { translate(tasks[0], DecodeParams::greedy_decoding(), mock, cache); });
  CHECK(mock.calls() == 1);
}

TEST_CASE("responses without delimiters are flagged unparsed") {
  const auto ds = fixture();
  const auto tasks = tasks_for(ds, {Condition::kGold});
  MockTranslator bare({}, false, false);
  ResponseCache cache;
  const auto r = translate(tasks[0], DecodeParams::greedy_decoding(), bare, cache);
  CHECK(r.unparsed);
  CHECK_FALSE(r.raw_response.empty());
  MockTranslator chatty({}, true, true);
  ResponseCache fresh;
  const auto r2 = translate(tasks[0], DecodeParams::greedy_decoding(), chatty, fresh);
  CHECK_FALSE(r2.unparsed);
  CHECK(r2.reasoning == "The hint was considered.");
}

TEST_CASE("records round-trip through JSONL") {
  const auto ds = fixture();
  MockTranslator mock;
  ResponseCache cache;
  std::vector<TranslationRecord> recs;
  for (const auto& t : tasks_for(ds, {Condition::kNone, Condition::kStruct})) {
    recs.push_back(translate(t, DecodeParams::greedy_decoding(), mock, cache));
  }
  const auto path = (std::filesystem::temp_directory_path() / "ctxnoise_records.jsonl").string();
  write_records(path, recs);
  const auto back = load_records(path);
  REQUIRE(back.size() == recs.size());
  for (size_t i = 0; i < recs.size(); ++i) CHECK(back[i].to_json() == recs[i].to_json());
  std::filesystem::remove(path);
}

TEST_CASE("top-k renormalization reports the tail") {
  const auto t = renormalize_top_k({{"a", 0.5}, {"b", 0.3}, {"c", 0.2}}, 2);
  CHECK(t.distribution.prob("a") == Catch::Approx(0.625).margin(1e-12));
  CHECK(t.distribution.prob("b") == Catch::Approx(0.375).margin(1e-12));
  CHECK(t.distribution.prob("c") == 0.0);
  CHECK(t.tail_mass == Catch::Approx(0.2).margin(1e-12));
  const auto full = renormalize_top_k({{"a", 0.5}, {"b", 0.5}}, 5);
  CHECK(full.tail_mass == Catch::Approx(0.0).margin(1e-12));
  const auto lp = from_logprobs({{"x", std::log(0.6)}, {"y", std::log(0.3)}}, 5);
  CHECK(lp.tail_mass == Catch::Approx(0.1));
  CHECK(lp.distribution.prob("x") == Catch::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(renormalize_top_k({{"a", 1.0}}, 0), Error);
}

TEST_CASE("token distributions validate and break argmax ties by token") {
  CHECK_THROWS_AS(TokenDistribution({{"a", 0.5}, {"b", 0.4}}), Error);
  CHECK_THROWS_AS(TokenDistribution({{"a", 1.2}, {"b", -0.2}}), Error);
  CHECK_THROWS_AS(TokenDistribution(std::map<std::string, double>{}), Error);
  const TokenDistribution d({{"b", 0.4}, {"a", 0.4}, {"c", 0.2}});
  CHECK(d.argmax() == "a");
  CHECK(TokenDistribution({{"a", 0.25}, {"b", 0.25}, {"c", 0.25}, {"d", 0.25}}).entropy() ==
        Catch::Approx(std::log(4.0)));
}

TEST_CASE("ToyLM serves its fixture distributions") {
  auto lm = ToyLM::load(kData + "/toylm.json");
  CHECK(lm.vocab().size() == 8);
  const DualPrompt prompts{"x means: y", "x"};
  const auto base = next_token_distribution(lm, {}, prompts, PromptVariant::kWithoutContext);
  CHECK(base.entries() == std::map<std::string, double>{{"money", 0.7}, {"went", 0.1}, {"saved", 0.1}, {"wasted", 0.1}});
  const auto ctx = next_token_distribution(lm, {}, prompts, PromptVariant::kWithContext);
  CHECK(ctx.entries() == std::map<std::string, double>{{"money", 0.95}, {"saved", 0.05}});
  // Rows missing from the context table fall back to base.
  CHECK(next_token_distribution(lm, {"money", "went", "down"}, prompts, PromptVariant::kWithContext).entries() ==
        next_token_distribution(lm, {"money", "went", "down"}, prompts, PromptVariant::kWithoutContext).entries());
  CHECK_THROWS_AS(lm.next_distribution("x", {"unknown"}), Error);
}

TEST_CASE("ToyLM fixture validation") {
  auto j = nlohmann::json::parse(text::read_file(kData + "/toylm.json"));
  auto bad = j;
  bad["vocab"].erase(0);
  CHECK_THROWS_AS(ToyLM::from_json(bad), Error);
  bad = j;
  bad["base"]["<s>"]["money"] = 0.5;
  CHECK_THROWS_AS(ToyLM::from_json(bad), Error);
  bad = j;
  bad["context"]["<s>"]["zebra"] = 0.0;
  CHECK_THROWS_AS(ToyLM::from_json(bad), Error);
}

TEST_CASE("HTTP chat client retries, authenticates and reads logprobs") {
  LocalServer srv;
  std::atomic<int> hits{0};
  std::string seen_auth;
  nlohmann::json seen_body;
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 503;
      return;
    }
    seen_auth = req.get_header_value("Authorization");
    seen_body = nlohmann::json::parse(req.body);
    nlohmann::json out{
        {"choices",
         {{{"message", {{"role", "assistant"}, {"content", "<translation>hi</translation>"}}},
           {"logprobs",
            {{"content", {{{"token", "hi"}, {"logprob", -0.1}, {"top_logprobs", {{{"token", "hi"}, {"logprob", -0.1}}, {{"token", "yo"}, {"logprob", -2.5}}}}}}}}}}}}};
    res.set_content(out.dump(), "application/json");
  });
  HttpChatClient client(fast_config(srv.base_url()));
  ChatRequest req;
  req.model_id = "m";
  req.messages = {{"user", "translate"}};
  req.top_logprobs = 2;
  const auto r = client.complete(req);
  CHECK(hits == 2);
  CHECK(seen_auth == "Bearer secret");
  CHECK(seen_body["temperature"] == 0.0);
  CHECK(seen_body["logprobs"] == true);
  CHECK(r.content == "<translation>hi</translation>");
  REQUIRE(r.top_logprobs.size() == 1);
  CHECK(r.top_logprobs[0].size() == 2);
  CHECK(r.top_logprobs[0][1].first == "yo");
}

TEST_CASE("HTTP chat client gives up on client errors and exhausted retries") {
  LocalServer srv;
  std::atomic<int> hits{0};
  srv.server().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  srv.server().Post("/v2/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 500;
  });
  ChatRequest req;
  req.messages = {{"user", "x"}};
  HttpChatClient unauthorized(fast_config(srv.base_url()));
  try {
    unauthorized.complete(req);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUpstream);
  }
  CHECK(hits == 1);
  auto cfg = fast_config(srv.base_url().substr(0, srv.base_url().size() - 3) + "/v2");
  HttpChatClient broken(cfg);
  CHECK_THROWS_AS(broken.complete(req), Error);
  CHECK(hits == 1 + cfg.retry.max_attempts);
}

TEST_CASE("completions step model reads top logprobs") {
  LocalServer srv;
  nlohmann::json seen;
  srv.server().Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    nlohmann::json out{{"choices",
                        {{{"text", " the"},
                          {"finish_reason", "length"},
                          {"logprobs", {{"top_logprobs", {{{" the", std::log(0.5)}, {" a", std::log(0.3)}}}}}}}}}};
    res.set_content(out.dump(), "application/json");
  });
  CompletionsStepModel model(fast_config(srv.base_url()), 2);
  const auto d = model.next_distribution("Say:", {" hello", ","});
  CHECK(seen["prompt"] == "Say: hello,");
  CHECK(seen["max_tokens"] == 1);
  CHECK(d.prob(" the") == Catch::Approx(0.625));
  CHECK(model.last_tail_mass() == Catch::Approx(0.2));
}
