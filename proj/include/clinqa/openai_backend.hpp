#pragma once

#include <memory>
#include <string>

#include "clinqa/llm_gateway.hpp"

namespace clinqa::llm {

struct OpenAIConfig {
  // scheme://host[:port][/prefix], e.g. https://api.openai.com/v1
  std::string base_url = "https://api.openai.com/v1";
  std::string api_key;
  // Azure-style deployments authenticate with an "api-key" header instead
  // of a bearer token.
  bool azure_key_header = false;
  int timeout_seconds = 120;
};

// Reads OPENAI_API_KEY and (optionally) OPENAI_BASE_URL. Throws ConfigError
// when no key is set.
OpenAIConfig openai_config_from_env();

// Client for OpenAI-compatible /chat/completions and /embeddings endpoints.
class OpenAIBackend : public Backend {
 public:
  explicit OpenAIBackend(OpenAIConfig config);
  ~OpenAIBackend() override;

  std::string id() const override;
  Completion complete(const CompletionRequest& request) override;
  EmbeddingBatch embed(std::span<const std::string> texts, const std::string& model_id) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace clinqa::llm
