#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "clinqa/openai_backend.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <regex>

#include <httplib.h>
#include <json.hpp>

namespace clinqa::llm {

using nlohmann::json;

namespace {

FailureKind classify_status(int status, const std::string& body) {
  if (status == 401 || status == 403) return FailureKind::auth;
  if (status == 408 || status == 409 || status == 429 || status >= 500) return FailureKind::transient;
  if (body.find("content_filter") != std::string::npos) return FailureKind::content_filter;
  return FailureKind::invalid_request;
}

std::string error_message(const std::string& body) {
  const json j = json::parse(body, nullptr, false);
  if (!j.is_discarded() && j.contains("error")) {
    const auto& e = j["error"];
    if (e.is_object() && e.contains("message") && e["message"].is_string()) return e["message"].get<std::string>();
    if (e.is_string()) return e.get<std::string>();
  }
  return body.substr(0, 200);
}

}  // namespace

struct OpenAIBackend::Impl {
  OpenAIConfig config;
  std::string origin;
  std::string prefix;

  httplib::Headers headers() const {
    if (config.azure_key_header) return {{"api-key", config.api_key}};
    return {{"Authorization", "Bearer " + config.api_key}};
  }

  json post(const std::string& path, const json& body) const {
    httplib::Client client(origin);
    client.set_connection_timeout(config.timeout_seconds);
    client.set_read_timeout(config.timeout_seconds);
    client.set_write_timeout(config.timeout_seconds);
    auto res = client.Post(prefix + path, headers(), body.dump(), "application/json");
    if (!res) throw BackendFailure(FailureKind::transient, "transport error: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw BackendFailure(classify_status(res->status, res->body),
                           "HTTP " + std::to_string(res->status) + ": " + error_message(res->body));
    json parsed = json::parse(res->body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object())
      throw BackendFailure(FailureKind::invalid_response, "response is not a JSON object");
    return parsed;
  }
};

OpenAIConfig openai_config_from_env() {
  OpenAIConfig config;
  const char* key = std::getenv("OPENAI_API_KEY");
  if (key == nullptr || *key == '\0') throw ConfigError("OPENAI_API_KEY is not set");
  config.api_key = key;
  if (const char* base = std::getenv("OPENAI_BASE_URL"); base != nullptr && *base != '\0') config.base_url = base;
  return config;
}

OpenAIBackend::OpenAIBackend(OpenAIConfig config) : impl_(std::make_unique<Impl>()) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config.base_url, m, url_re)) throw ConfigError("invalid base URL '" + config.base_url + "'");
  impl_->origin = m[1].str();
  impl_->prefix = m[2].matched ? m[2].str() : "";
  while (!impl_->prefix.empty() && impl_->prefix.back() == '/') impl_->prefix.pop_back();
  impl_->config = std::move(config);
}

OpenAIBackend::~OpenAIBackend() = default;

std::string OpenAIBackend::id() const { return "openai:" + impl_->origin; }

Completion OpenAIBackend::complete(const CompletionRequest& request) {
  json body = {
      {"model", request.model_id},
      {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
      {"temperature", request.temperature},
      {"max_tokens", request.max_output_tokens},
  };
  const auto start = std::chrono::steady_clock::now();
  const json res = impl_->post("/chat/completions", body);
  const auto stop = std::chrono::steady_clock::now();

  if (!res.contains("choices") || !res["choices"].is_array() || res["choices"].empty())
    throw BackendFailure(FailureKind::invalid_response, "response has no choices");
  const json& choice = res["choices"][0];
  if (choice.value("finish_reason", std::string()) == "content_filter")
    throw BackendFailure(FailureKind::content_filter, "completion blocked by content filter");
  if (!choice.contains("message") || !choice["message"].contains("content") ||
      !choice["message"]["content"].is_string())
    throw BackendFailure(FailureKind::invalid_response, "choice has no text content");

  Completion c;
  c.text = choice["message"]["content"].get<std::string>();
  if (res.contains("usage") && res["usage"].is_object()) {
    c.usage.input_tokens = res["usage"].value("prompt_tokens", std::int64_t{0});
    c.usage.output_tokens = res["usage"].value("completion_tokens", std::int64_t{0});
  }
  c.latency_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  c.backend_id = id();
  return c;
}

EmbeddingBatch OpenAIBackend::embed(std::span<const std::string> texts, const std::string& model_id) {
  json body = {{"model", model_id}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  const json res = impl_->post("/embeddings", body);
  if (!res.contains("data") || !res["data"].is_array())
    throw BackendFailure(FailureKind::invalid_response, "embedding response has no data");

  EmbeddingBatch batch;
  batch.vectors.resize(texts.size());
  for (const auto& item : res["data"]) {
    const auto index = item.value("index", std::size_t{0});
    if (index >= texts.size() || !item.contains("embedding"))
      throw BackendFailure(FailureKind::invalid_response, "embedding index out of range");
    batch.vectors[index] = item["embedding"].get<std::vector<double>>();
  }
  if (res.contains("usage") && res["usage"].is_object())
    batch.usage.input_tokens = res["usage"].value("prompt_tokens", std::int64_t{0});
  return batch;
}

}  // namespace clinqa::llm
