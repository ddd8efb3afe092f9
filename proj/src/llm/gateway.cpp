#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "clinqa/llm_gateway.hpp"
#include "clinqa/text.hpp"

namespace clinqa::llm {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
  ~SlotGuard() { s_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& s_;
};

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::string_view to_string(FailureKind kind) {
  switch (kind) {
    case FailureKind::transient: return "retry budget exhausted";
    case FailureKind::auth: return "authentication failure";
    case FailureKind::content_filter: return "content filter rejection";
    case FailureKind::invalid_request: return "invalid request";
    case FailureKind::invalid_response: return "invalid response";
  }
  return "?";
}

std::pair<std::string, std::string> split_tag(std::string_view tag) {
  const auto slash = tag.find('/');
  if (slash == std::string_view::npos) return {std::string(tag), {}};
  return {std::string(tag.substr(0, slash)), std::string(tag.substr(slash + 1))};
}

std::int64_t whitespace_tokens(std::string_view s) { return static_cast<std::int64_t>(text::count_words(s)); }

std::string to_json_line(const LedgerEntry& e) {
  ordered_json j;
  j["ts"] = e.ts;
  j["request_tag"] = e.request_tag;
  j["model_id"] = e.model_id;
  j["input_tokens"] = e.input_tokens;
  j["output_tokens"] = e.output_tokens;
  j["temperature"] = e.temperature;
  return j.dump();
}

LedgerEntry ledger_entry_from_json(std::string_view line) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("malformed ledger line: " + std::string(line));
  try {
    LedgerEntry e;
    e.ts = j.value("ts", std::int64_t{0});
    e.request_tag = j.at("request_tag").get<std::string>();
    e.model_id = j.at("model_id").get<std::string>();
    e.input_tokens = j.at("input_tokens").get<std::int64_t>();
    e.output_tokens = j.at("output_tokens").get<std::int64_t>();
    e.temperature = j.value("temperature", 0.0);
    if (e.input_tokens < 0 || e.output_tokens < 0) throw DataError("negative token count");
    return e;
  } catch (const json::exception& ex) {
    throw DataError(std::string("malformed ledger line: ") + ex.what());
  }
}

void UsageLedger::append(LedgerEntry entry) {
  std::lock_guard lock(mu_);
  entries_.push_back(std::move(entry));
}

std::vector<LedgerEntry> UsageLedger::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

std::size_t UsageLedger::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

void UsageLedger::write_jsonl(const std::filesystem::path& path) const {
  auto sorted = entries();
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const LedgerEntry& a, const LedgerEntry& b) { return a.request_tag < b.request_tag; });
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& e : sorted) out << to_json_line(e) << '\n';
}

std::vector<LedgerEntry> UsageLedger::read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<LedgerEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    out.push_back(ledger_entry_from_json(line));
  }
  return out;
}

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayOptions options)
    : backend_(std::move(backend)),
      options_(std::move(options)),
      slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, options_.parallelism))),
      jitter_state_(options_.jitter_seed) {
  if (!backend_) throw std::invalid_argument("Gateway: backend must not be null");
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (!options_.clock) options_.clock = system_clock_ms;
  if (options_.embedding_batch_size == 0) options_.embedding_batch_size = 1;
}

std::size_t Gateway::retries() const {
  std::lock_guard lock(mu_);
  return retries_;
}

std::chrono::milliseconds Gateway::backoff_delay(int attempt) {
  const auto& r = options_.retry;
  double raw = static_cast<double>(r.base.count()) * std::pow(2.0, attempt);
  raw = std::min(raw, static_cast<double>(r.cap.count()));
  double u = 0.0;
  {
    std::lock_guard lock(mu_);
    u = static_cast<double>(splitmix64(jitter_state_) >> 11) * 0x1.0p-53;
  }
  // jitter keeps the delay within [raw/2, raw]
  return std::chrono::milliseconds(static_cast<std::int64_t>(raw * (0.5 + 0.5 * u)));
}

template <typename Fn>
auto Gateway::with_retries(const std::string& tag, Fn&& fn) -> decltype(fn()) {
  for (int attempt = 0;; ++attempt) {
    try {
      SlotGuard slot(slots_);
      return fn();
    } catch (const BackendFailure& f) {
      if (f.kind() != FailureKind::transient || attempt >= options_.retry.max_retries)
        throw BackendError(f.kind(), tag, attempt + 1, f.what());
      {
        std::lock_guard lock(mu_);
        ++retries_;
      }
      options_.sleep(backoff_delay(attempt));
    }
  }
}

Completion Gateway::complete(const CompletionRequest& request) {
  if (request.prompt.empty()) throw std::invalid_argument("complete: prompt must be non-empty");
  if (!(request.temperature >= 0.0 && request.temperature <= 1.0))
    throw std::invalid_argument("complete: temperature must lie in [0, 1]");
  Completion c = with_retries(request.request_tag, [&] { return backend_->complete(request); });
  ledger_.append({options_.clock(), request.request_tag, request.model_id, c.usage.input_tokens,
                  c.usage.output_tokens, request.temperature});
  return c;
}

std::vector<Embedding> Gateway::embed(std::span<const std::string> texts, std::string_view tag) {
  std::vector<Embedding> out;
  if (texts.empty()) return out;
  for (const auto& t : texts)
    if (t.empty()) throw std::invalid_argument("embed: texts must be non-empty strings");
  out.reserve(texts.size());
  const std::size_t batch = options_.embedding_batch_size;
  std::size_t dim = 0;
  for (std::size_t begin = 0; begin < texts.size(); begin += batch) {
    const auto chunk = texts.subspan(begin, std::min(batch, texts.size() - begin));
    std::size_t batch_no = 0;
    {
      std::lock_guard lock(mu_);
      batch_no = embed_batches_++;
    }
    const std::string batch_tag = std::string(tag) + "/" + std::to_string(batch_no);
    EmbeddingBatch result =
        with_retries(batch_tag, [&] { return backend_->embed(chunk, options_.embedding_model); });
    if (result.vectors.size() != chunk.size())
      throw BackendError(FailureKind::invalid_response, batch_tag, 1, "embedding count does not match inputs");
    for (auto& v : result.vectors) {
      if (dim == 0) dim = v.size();
      if (v.empty() || v.size() != dim)
        throw BackendError(FailureKind::invalid_response, batch_tag, 1, "embedding dimension mismatch");
      if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); }))
        throw BackendError(FailureKind::invalid_response, batch_tag, 1, "non-finite embedding value");
      out.push_back({std::move(v), options_.embedding_model});
    }
    ledger_.append({options_.clock(), batch_tag, options_.embedding_model, result.usage.input_tokens,
                    result.usage.output_tokens, 0.0});
  }
  return out;
}

std::vector<double> anneal_temperatures(std::size_t n_calls) {
  if (n_calls < 1) throw std::invalid_argument("anneal_temperatures: n_calls must be >= 1");
  std::vector<double> t(n_calls, 0.0);
  if (n_calls == 1) return t;
  const double denom = static_cast<double>(n_calls - 1);
  for (std::size_t i = 0; i < n_calls; ++i) t[i] = static_cast<double>(i) / denom;
  t.back() = 1.0;
  return t;
}

PriceTable default_price_table() {
  const Rate gpt4o{0.005, 0.015};
  return {
      {"gpt-4o", gpt4o},
      {"gpt-4o-2024-05-13", gpt4o},
      {"text-embedding-3-small", {0.00002, 0.0}},
  };
}

PriceTable load_price_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError(path.string() + ": price table must be a JSON object");
  PriceTable table;
  for (const auto& [model, rate] : j.items()) {
    if (!rate.is_object() || !rate.contains("usd_per_1k_input") || !rate.contains("usd_per_1k_output"))
      throw DataError(path.string() + ": bad rate for '" + model + "'");
    Rate r{rate["usd_per_1k_input"].get<double>(), rate["usd_per_1k_output"].get<double>()};
    if (r.usd_per_1k_input < 0 || r.usd_per_1k_output < 0)
      throw DataError(path.string() + ": negative rate for '" + model + "'");
    table[model] = r;
  }
  return table;
}

double estimate_cost(std::span<const LedgerEntry> entries, const PriceTable& prices) {
  std::map<std::string, std::pair<std::int64_t, std::int64_t>, std::less<>> totals;
  for (const auto& e : entries) {
    auto& t = totals[e.model_id];
    t.first += e.input_tokens;
    t.second += e.output_tokens;
  }
  double usd = 0.0;
  for (const auto& [model, tokens] : totals) {
    auto it = prices.find(model);
    if (it == prices.end()) throw ConfigError("no price for model '" + model + "'");
    usd += static_cast<double>(tokens.first) / 1000.0 * it->second.usd_per_1k_input +
           static_cast<double>(tokens.second) / 1000.0 * it->second.usd_per_1k_output;
  }
  return usd;
}

}  // namespace clinqa::llm
