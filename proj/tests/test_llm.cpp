#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <json.hpp>
#include <random>
#include <thread>

#include "clinqa/llm_gateway.hpp"
#include "clinqa/openai_backend.hpp"
#include "support.hpp"

using namespace clinqa;
using namespace clinqa::llm;
using namespace std::chrono_literals;

namespace {

struct Recorder {
  std::vector<std::chrono::milliseconds> sleeps;
};

GatewayOptions quiet_options(Recorder& rec, std::size_t parallelism = 4) {
  GatewayOptions o;
  o.parallelism = parallelism;
  o.sleep = [&rec](std::chrono::milliseconds d) { rec.sleeps.push_back(d); };
  o.clock = [] { return std::int64_t{42}; };
  return o;
}

CompletionRequest request(std::string tag, std::string prompt = "hello there model") {
  CompletionRequest r;
  r.model_id = "gpt-4o";
  r.prompt = std::move(prompt);
  r.request_tag = std::move(tag);
  return r;
}

// Counts how many calls are in flight at once.
class SlowBackend : public Backend {
 public:
  std::string id() const override { return "slow"; }
  Completion complete(const CompletionRequest&) override {
    const int now = ++active_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(5ms);
    --active_;
    return {"ok", {1, 1}, 0.0, "slow"};
  }
  EmbeddingBatch embed(std::span<const std::string>, const std::string&) override { return {}; }
  int peak() const { return peak_.load(); }

 private:
  std::atomic<int> active_{0};
  std::atomic<int> peak_{0};
};

}  // namespace

TEST_CASE("transient failures are retried with bounded backoff") {
  auto mock = std::make_shared<MockBackend>(MockOptions{MockMode::echo});
  mock->push_script(MockReply::fail(FailureKind::transient));
  mock->push_script(MockReply::fail(FailureKind::transient));
  mock->push_script(MockReply::ok("third time lucky"));
  Recorder rec;
  Gateway gw(mock, quiet_options(rec));
  const auto c = gw.complete(request("question_gen/d1"));
  CHECK(c.text == "third time lucky");
  CHECK(gw.retries() == 2);
  REQUIRE(rec.sleeps.size() == 2);
  CHECK(rec.sleeps[0] >= 500ms);
  CHECK(rec.sleeps[0] <= 1000ms);
  CHECK(rec.sleeps[1] >= 1000ms);
  CHECK(rec.sleeps[1] <= 2000ms);
  REQUIRE(gw.ledger().size() == 1);
  CHECK(gw.ledger().entries()[0].ts == 42);
}

TEST_CASE("retry budget exhaustion surfaces a backend error") {
  auto mock = std::make_shared<MockBackend>();
  for (int i = 0; i < 10; ++i) mock->push_script(MockReply::fail(FailureKind::transient));
  Recorder rec;
  Gateway gw(mock, quiet_options(rec));
  try {
    gw.complete(request("question_gen/d1"));
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.retries_exhausted());
    CHECK(e.attempts() == 6);
    CHECK(e.request_tag() == "question_gen/d1");
  }
  CHECK(rec.sleeps.size() == 5);
  CHECK(gw.ledger().size() == 0);
}

TEST_CASE("non-transient failures are not retried") {
  for (auto kind : {FailureKind::auth, FailureKind::content_filter, FailureKind::invalid_request}) {
    auto mock = std::make_shared<MockBackend>();
    mock->push_script(MockReply::fail(kind));
    Recorder rec;
    Gateway gw(mock, quiet_options(rec));
    try {
      gw.complete(request("answer_distill/d1/FINDINGS"));
      FAIL("expected BackendError");
    } catch (const BackendError& e) {
      CHECK(e.kind() == kind);
      CHECK(e.attempts() == 1);
      CHECK_FALSE(e.retries_exhausted());
    }
    CHECK(rec.sleeps.empty());
  }
}

TEST_CASE("backoff delays stay within jittered bounds and the cap") {
  Recorder rec;
  Gateway gw(std::make_shared<MockBackend>(), quiet_options(rec));
  for (int attempt = 0; attempt < 12; ++attempt) {
    const double raw = std::min(1000.0 * std::pow(2.0, attempt), 60000.0);
    const auto d = gw.backoff_delay(attempt).count();
    CHECK(d >= static_cast<std::int64_t>(raw / 2) - 1);
    CHECK(d <= static_cast<std::int64_t>(raw));
  }
}

TEST_CASE("parallelism bounds in-flight calls") {
  auto slow = std::make_shared<SlowBackend>();
  Recorder rec;
  Gateway gw(slow, quiet_options(rec, 2));
  std::vector<std::jthread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&gw, t] { gw.complete(request("question_gen/u" + std::to_string(t))); });
  }
  threads.clear();
  CHECK(slow->peak() <= 2);
  CHECK(gw.ledger().size() == 8);
}

TEST_CASE("request validation") {
  Recorder rec;
  Gateway gw(std::make_shared<MockBackend>(), quiet_options(rec));
  auto r = request("question_gen/x");
  r.temperature = 1.5;
  CHECK_THROWS_AS(gw.complete(r), std::invalid_argument);
  CHECK_THROWS_AS(gw.complete(request("question_gen/x", "")), std::invalid_argument);
  CHECK_THROWS_AS(Gateway(nullptr), std::invalid_argument);
}

TEST_CASE("embeddings are batched, deterministic and unit length") {
  auto mock = std::make_shared<MockBackend>();
  Recorder rec;
  auto opts = quiet_options(rec);
  opts.embedding_batch_size = 2;
  Gateway gw(mock, opts);
  const std::vector<std::string> texts{"Is the G-tube patent?", "Any free air?", "Is the G-tube patent?"};
  const auto vecs = gw.embed(texts, "embed/run");
  REQUIRE(vecs.size() == 3);
  CHECK(vecs[0].values == vecs[2].values);
  CHECK(vecs[0].values != vecs[1].values);
  double norm = 0.0;
  for (double x : vecs[1].values) norm += x * x;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
  const auto entries = gw.ledger().entries();
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].request_tag == "embed/run/0");
  CHECK(entries[0].model_id == "text-embedding-3-small");
  CHECK(mock->embed_calls() == 2);
  CHECK_THROWS_AS(gw.embed(std::vector<std::string>{""}), std::invalid_argument);
}

TEST_CASE("annealing schedule") {
  CHECK(anneal_temperatures(5) == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(anneal_temperatures(1) == std::vector<double>{0.0});
  CHECK(anneal_temperatures(2) == std::vector<double>{0.0, 1.0});
  const auto t = anneal_temperatures(64);
  CHECK(t.front() == 0.0);
  CHECK(t.back() == 1.0);
  CHECK(std::is_sorted(t.begin(), t.end()));
  CHECK_THROWS_AS(anneal_temperatures(0), std::invalid_argument);
}

TEST_CASE("cost estimate uses per-1k rates") {
  const auto prices = default_price_table();
  const std::vector<LedgerEntry> one{{0, "question_gen/a", "gpt-4o-2024-05-13", 1000, 1000, 0.0}};
  CHECK(estimate_cost(one, prices) == 0.020);
  const std::vector<LedgerEntry> none;
  CHECK(estimate_cost(none, prices) == 0.0);
  const std::vector<LedgerEntry> unknown{{0, "x", "mystery-model", 1, 1, 0.0}};
  CHECK_THROWS_AS(estimate_cost(unknown, prices), ConfigError);
}

TEST_CASE("cost is additive over ledger splits") {
  std::mt19937_64 rng(3);
  std::vector<LedgerEntry> entries;
  for (int i = 0; i < 200; ++i) {
    entries.push_back({0, "t/" + std::to_string(i), i % 3 ? "gpt-4o" : "text-embedding-3-small",
                       static_cast<std::int64_t>(rng() % 5000), static_cast<std::int64_t>(rng() % 2000), 0.0});
  }
  const auto prices = default_price_table();
  const double total = estimate_cost(entries, prices);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t cut = rng() % entries.size();
    const double a = estimate_cost(std::span(entries).first(cut), prices);
    const double b = estimate_cost(std::span(entries).subspan(cut), prices);
    CHECK(a + b == doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("price tables load from JSON") {
  support::TempDir tmp;
  support::write_file(tmp / "p.json", R"({"local-llm": {"usd_per_1k_input": 0.001, "usd_per_1k_output": 0.002}})");
  const auto table = load_price_table(tmp / "p.json");
  REQUIRE(table.contains("local-llm"));
  CHECK(table.at("local-llm").usd_per_1k_output == 0.002);
  support::write_file(tmp / "bad.json", R"({"m": {"usd_per_1k_input": 1}})");
  CHECK_THROWS_AS(load_price_table(tmp / "bad.json"), DataError);
}

TEST_CASE("ledger files are sorted by tag and read back") {
  UsageLedger ledger;
  ledger.append({5, "summarization/b", "gpt-4o", 10, 2, 0.0});
  ledger.append({6, "answer_distill/a/FINDINGS", "gpt-4o", 20, 4, 0.0});
  ledger.append({7, "summarization/b", "gpt-4o", 11, 3, 0.0});
  support::TempDir tmp;
  ledger.write_jsonl(tmp / "ledger.jsonl");
  const auto back = UsageLedger::read_jsonl(tmp / "ledger.jsonl");
  REQUIRE(back.size() == 3);
  CHECK(back[0].request_tag == "answer_distill/a/FINDINGS");
  CHECK(back[1].input_tokens == 10);
  CHECK(back[2].input_tokens == 11);
  CHECK(to_json_line(back[0]) ==
        R"({"ts":6,"request_tag":"answer_distill/a/FINDINGS","model_id":"gpt-4o","input_tokens":20,"output_tokens":4,"temperature":0.0})");
}

TEST_CASE("mock transcripts reply per stage and unit") {
  support::TempDir tmp;
  support::write_file(tmp / "t.jsonl",
                      "{\"stage\": \"question_gen\", \"unit\": \"d1\", \"response\": \"1. first?\"}\n"
                      "{\"stage\": \"question_gen\", \"unit\": \"d1\", \"response\": \"1. second?\"}\n"
                      "{\"stage\": \"summarization\", \"unit\": \"d2\", \"error\": \"auth\"}\n");
  auto mock = std::make_shared<MockBackend>();
  mock->load_transcript(tmp / "t.jsonl");
  Recorder rec;
  Gateway gw(mock, quiet_options(rec));
  CHECK(gw.complete(request("question_gen/d1")).text == "1. first?");
  CHECK(gw.complete(request("question_gen/d1")).text == "1. second?");
  CHECK(gw.complete(request("question_gen/d1")).text == "1. second?");
  CHECK_THROWS_AS(gw.complete(request("summarization/d2")), BackendError);
  CHECK(gw.complete(request("question_gen/other")).text.starts_with("Here are the questions:"));

  support::write_file(tmp / "bad.jsonl", "{\"stage\": \"question_gen\", \"unit\": \"d1\", \"error\": \"boom\"}\n");
  CHECK_THROWS_AS(MockBackend().load_transcript(tmp / "bad.jsonl"), DataError);
}

TEST_CASE("echo mock is a pure function of the prompt") {
  MockBackend a(MockOptions{MockMode::echo});
  MockBackend b(MockOptions{MockMode::echo});
  const auto r = request("question_gen/x", "same prompt");
  CHECK(a.complete(r).text == b.complete(r).text);
  CHECK(a.complete(r).text.starts_with("ECHO:"));
  CHECK(a.complete(request("question_gen/x", "other prompt")).text != a.complete(r).text);
  CHECK(a.complete(r).usage.input_tokens == 2);
  CHECK(split_tag("answer_distill/doc/IMPRESSION") == std::pair<std::string, std::string>{"answer_distill", "doc/IMPRESSION"});
}

TEST_CASE("synthetic mock answers distillation prompts with context quotes") {
  MockBackend mock(MockOptions{MockMode::synthetic, 0, 64, 1});
  const std::string prompt =
      "<report>\nThe tube is in place. Subcutaneous air is still present.\n</report>\n\nQ: one?\nQ: two?";
  auto r = request("answer_distill/d/FINDINGS", prompt);
  const auto text = mock.complete(r).text;
  CHECK(text.find("Q: one?\nA: \"") != std::string::npos);
  CHECK(text.find("Q: two?\nA: Unanswerable") != std::string::npos);
}

TEST_CASE("live backend speaks the chat and embeddings protocol") {
  httplib::Server server;
  std::atomic<int> chat_calls{0};
  std::string seen_auth;
  nlohmann::json seen_body;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    const int n = ++chat_calls;
    seen_auth = req.get_header_value("Authorization");
    seen_body = nlohmann::json::parse(req.body);
    if (n == 1) {
      res.status = 429;
      res.set_content(R"({"error": {"message": "slow down"}})", "application/json");
      return;
    }
    res.set_content(R"({"choices": [{"message": {"role": "assistant", "content": "1. Is it patent?"},
                       "finish_reason": "stop"}], "usage": {"prompt_tokens": 12, "completion_tokens": 5}})",
                    "application/json");
  });
  server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    nlohmann::json data = nlohmann::json::array();
    for (std::size_t i = body["input"].size(); i-- > 0;) {
      data.push_back({{"index", i}, {"embedding", {static_cast<double>(i), 1.0}}});
    }
    res.set_content(nlohmann::json({{"data", data}, {"usage", {{"prompt_tokens", 7}}}}).dump(), "application/json");
  });
  server.Post("/denied/v1/chat/completions", [](const httplib::Request&, httplib::Response& res) {
    res.status = 401;
    res.set_content(R"({"error": {"message": "bad key"}})", "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread loop([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  OpenAIConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  cfg.api_key = "sk-test";
  cfg.timeout_seconds = 5;
  Recorder rec;
  Gateway gw(std::make_shared<OpenAIBackend>(cfg), quiet_options(rec));
  auto r = request("question_gen/d1", "generate 1 question");
  r.temperature = 0.25;
  const auto c = gw.complete(r);
  CHECK(c.text == "1. Is it patent?");
  CHECK(c.usage.input_tokens == 12);
  CHECK(c.usage.output_tokens == 5);
  CHECK(gw.retries() == 1);
  CHECK(seen_auth == "Bearer sk-test");
  CHECK(seen_body["model"] == "gpt-4o");
  CHECK(seen_body["temperature"] == 0.25);
  CHECK(seen_body["messages"][0]["content"] == "generate 1 question");

  const auto vecs = gw.embed(std::vector<std::string>{"a", "b"}, "embed/x");
  REQUIRE(vecs.size() == 2);
  CHECK(vecs[1].values == std::vector<double>{1.0, 1.0});

  OpenAIConfig denied = cfg;
  denied.base_url = "http://127.0.0.1:" + std::to_string(port) + "/denied/v1";
  Gateway gw2(std::make_shared<OpenAIBackend>(denied), quiet_options(rec));
  try {
    gw2.complete(request("question_gen/d1"));
    FAIL("expected auth failure");
  } catch (const BackendError& e) {
    CHECK(e.kind() == FailureKind::auth);
  }

  server.stop();
  loop.join();

  OpenAIConfig bad;
  bad.base_url = "ftp://nowhere";
  CHECK_THROWS_AS(OpenAIBackend{bad}, ConfigError);
}
