#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "clinqa/error.hpp"

namespace clinqa::llm {

struct CompletionRequest {
  std::string model_id;
  std::string prompt;
  double temperature = 0.0;
  int max_output_tokens = 1024;
  // "<stage>/<unit id>[/...]"; keys mock transcripts and the usage ledger
  std::string request_tag;
};

struct Usage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

struct Completion {
  std::string text;
  Usage usage;
  double latency_ms = 0.0;
  std::string backend_id;
};

struct Embedding {
  std::vector<double> values;
  std::string model_id;
};

struct EmbeddingBatch {
  std::vector<std::vector<double>> vectors;
  Usage usage;
};

// Failure classes a backend reports; only `transient` is retried.
enum class FailureKind { transient, auth, content_filter, invalid_request, invalid_response };

std::string_view to_string(FailureKind kind);

// Thrown by Backend implementations for a single failed attempt.
class BackendFailure : public std::runtime_error {
 public:
  BackendFailure(FailureKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  FailureKind kind() const noexcept { return kind_; }

 private:
  FailureKind kind_;
};

// Thrown by the Gateway once a request has definitively failed.
class BackendError : public Error {
 public:
  BackendError(FailureKind kind, std::string request_tag, int attempts, const std::string& detail)
      : Error(std::string(to_string(kind)) + " for request '" + request_tag + "' after " +
              std::to_string(attempts) + " attempt(s): " + detail),
        kind_(kind),
        request_tag_(std::move(request_tag)),
        attempts_(attempts) {}

  FailureKind kind() const noexcept { return kind_; }
  const std::string& request_tag() const noexcept { return request_tag_; }
  int attempts() const noexcept { return attempts_; }
  bool retries_exhausted() const noexcept { return kind_ == FailureKind::transient; }

 private:
  FailureKind kind_;
  std::string request_tag_;
  int attempts_;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual Completion complete(const CompletionRequest& request) = 0;
  virtual EmbeddingBatch embed(std::span<const std::string> texts, const std::string& model_id) = 0;
};

struct LedgerEntry {
  std::int64_t ts = 0;  // milliseconds since the epoch
  std::string request_tag;
  std::string model_id;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double temperature = 0.0;
};

std::string to_json_line(const LedgerEntry& entry);
LedgerEntry ledger_entry_from_json(std::string_view line);

// Append-only record of successful calls.
class UsageLedger {
 public:
  void append(LedgerEntry entry);
  std::vector<LedgerEntry> entries() const;
  std::size_t size() const;

  // Writes entries ordered by request tag, keeping call order within a tag,
  // so concurrent runs produce identical files.
  void write_jsonl(const std::filesystem::path& path) const;
  static std::vector<LedgerEntry> read_jsonl(const std::filesystem::path& path);

 private:
  mutable std::mutex mu_;
  std::vector<LedgerEntry> entries_;
};

struct RetryPolicy {
  int max_retries = 5;
  std::chrono::milliseconds base{1000};
  std::chrono::milliseconds cap{60000};
};

struct GatewayOptions {
  RetryPolicy retry;
  std::size_t parallelism = 4;
  std::string embedding_model = "text-embedding-3-small";
  std::size_t embedding_batch_size = 256;
  std::uint64_t jitter_seed = 0;
  // Injected for tests and for timestamp-free mock runs.
  std::function<void(std::chrono::milliseconds)> sleep;
  std::function<std::int64_t()> clock;
};

// Shared entry point to a backend: bounded parallelism, retries with
// exponential backoff, and usage accounting.
class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Backend> backend, GatewayOptions options = {});

  Completion complete(const CompletionRequest& request);
  std::vector<Embedding> embed(std::span<const std::string> texts, std::string_view tag = "embed");

  UsageLedger& ledger() noexcept { return ledger_; }
  const UsageLedger& ledger() const noexcept { return ledger_; }
  std::size_t retries() const;
  const GatewayOptions& options() const noexcept { return options_; }
  const Backend& backend() const noexcept { return *backend_; }

  // Delay before retry number `attempt` (0-based), jitter included.
  std::chrono::milliseconds backoff_delay(int attempt);

 private:
  template <typename Fn>
  auto with_retries(const std::string& tag, Fn&& fn) -> decltype(fn());

  std::shared_ptr<Backend> backend_;
  GatewayOptions options_;
  UsageLedger ledger_;
  std::counting_semaphore<> slots_;
  mutable std::mutex mu_;
  std::uint64_t jitter_state_;
  std::size_t retries_ = 0;
  std::size_t embed_batches_ = 0;
};

// Linear schedule from 0 to 1 over generation calls.
std::vector<double> anneal_temperatures(std::size_t n_calls);

struct Rate {
  double usd_per_1k_input = 0.0;
  double usd_per_1k_output = 0.0;
};

using PriceTable = std::map<std::string, Rate, std::less<>>;

PriceTable default_price_table();
// JSON object: {"model": {"usd_per_1k_input": x, "usd_per_1k_output": y}}
PriceTable load_price_table(const std::filesystem::path& path);
double estimate_cost(std::span<const LedgerEntry> entries, const PriceTable& prices);

// Whitespace token count used by the mock backend.
std::int64_t whitespace_tokens(std::string_view s);

// ---------------------------------------------------------------------------
// Mock backend

enum class MockMode {
  // "ECHO:" + hash of the prompt
  echo,
  // plausible stage-aware outputs derived from the prompt
  synthetic,
};

struct MockOptions {
  MockMode mode = MockMode::synthetic;
  std::uint64_t seed = 0;
  std::size_t embedding_dim = 64;
  // synthetic distillation answers at most this many questions per call and
  // replies "Unanswerable" to the rest
  std::optional<std::size_t> answerable_per_call;
};

struct MockReply {
  std::string text;
  std::optional<FailureKind> failure;

  static MockReply ok(std::string t) { return {std::move(t), std::nullopt}; }
  static MockReply fail(FailureKind k) { return {{}, k}; }
};

// Deterministic offline backend. Replies come from, in order: the global
// script queue, the transcript entry for (stage, unit), the configured mode.
class MockBackend : public Backend {
 public:
  explicit MockBackend(MockOptions options = {});

  std::string id() const override { return "mock"; }
  Completion complete(const CompletionRequest& request) override;
  EmbeddingBatch embed(std::span<const std::string> texts, const std::string& model_id) override;

  void push_script(MockReply reply);
  // Replies for one (stage, unit) key are consumed in order; the last one
  // repeats once the list is exhausted.
  void add_transcript_entry(std::string stage, std::string unit, MockReply reply);
  // JSONL lines: {"stage": ..., "unit": ..., "response": "..."} or
  // {"stage": ..., "unit": ..., "error": "transient|auth|content_filter|..."}
  void load_transcript(const std::filesystem::path& path);

  std::size_t calls() const;
  std::size_t embed_calls() const;

  // Deterministic unit vector for a text.
  std::vector<double> embedding_for(std::string_view text) const;

 private:
  std::string synthesize(const CompletionRequest& request) const;

  MockOptions options_;
  mutable std::mutex mu_;
  std::deque<MockReply> script_;
  std::map<std::pair<std::string, std::string>, std::vector<MockReply>> transcript_;
  std::map<std::pair<std::string, std::string>, std::size_t> consumed_;
  std::size_t calls_ = 0;
  std::size_t embed_calls_ = 0;
};

// Splits "<stage>/<unit>" request tags.
std::pair<std::string, std::string> split_tag(std::string_view tag);

}  // namespace clinqa::llm
