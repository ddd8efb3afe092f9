#include <array>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "clinqa/llm_gateway.hpp"
#include "clinqa/text.hpp"

namespace clinqa::llm {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

FailureKind parse_failure(std::string_view name) {
  if (name == "transient" || name == "rate_limit" || name == "timeout") return FailureKind::transient;
  if (name == "auth") return FailureKind::auth;
  if (name == "content_filter") return FailureKind::content_filter;
  if (name == "invalid_request") return FailureKind::invalid_request;
  if (name == "invalid_response") return FailureKind::invalid_response;
  throw DataError("unknown mock error kind '" + std::string(name) + "'");
}

// Body of the first "<tag>\n...\n</tag>" block of a rendered prompt.
std::string_view tagged_block(std::string_view prompt) {
  if (prompt.empty() || prompt[0] != '<') return {};
  const auto close = prompt.find(">\n");
  if (close == std::string_view::npos) return {};
  const std::string name(prompt.substr(1, close - 1));
  const std::string end_tag = "\n</" + name + ">";
  const auto end = prompt.find(end_tag, close + 2);
  if (end == std::string_view::npos) return {};
  return prompt.substr(close + 2, end - close - 2);
}

std::vector<std::string> content_words(std::string_view s) {
  std::vector<std::string> out;
  for (auto w : text::split_ws(s)) {
    std::string lw;
    for (char c : w) {
      if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) lw.push_back(static_cast<char>(c | 0x20));
    }
    if (lw.size() >= 4) out.push_back(std::move(lw));
  }
  return out;
}

std::vector<std::string_view> sentences(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    const bool end = i == s.size() || s[i] == '\n' ||
                     (s[i] == '.' && (i + 1 == s.size() || text::is_space(static_cast<unsigned char>(s[i + 1]))));
    if (!end) continue;
    const auto sent = text::trim(s.substr(start, i - start));
    if (text::count_words(sent) >= 3 && sent.find(':') == std::string_view::npos) out.push_back(sent);
    start = i + 1;
  }
  return out;
}

std::size_t requested_question_count(std::string_view prompt) {
  const auto pos = prompt.find("generate ");
  if (pos == std::string_view::npos) return 5;
  std::size_t i = pos + 9;
  std::size_t n = 0;
  bool any = false;
  while (i < prompt.size() && prompt[i] >= '0' && prompt[i] <= '9') {
    n = n * 10 + static_cast<std::size_t>(prompt[i] - '0');
    ++i;
    any = true;
  }
  return any && n > 0 ? n : 5;
}

std::string make_question(std::uint64_t h, const std::vector<std::string>& words) {
  auto pick = [&](std::uint64_t salt) -> std::string {
    if (words.empty()) return "finding";
    return words[(h ^ (salt * 0x9e3779b97f4a7c15ULL)) % words.size()];
  };
  const std::string a = pick(1);
  const std::string b = pick(2);
  switch ((h >> 32) % 7) {
    case 0: return "Is there evidence of " + a + " near the " + b + "?";
    case 1: return "Does the " + a + " suggest " + b + "?";
    case 2: return "Has the " + a + " changed since the prior " + b + "?";
    case 3: return "Which findings relate to the " + a + " and " + b + "?";
    case 4: return "What is the status of the " + a + " in relation to " + b + "?";
    case 5: return "How severe is the " + a + " affecting the " + b + "?";
    default: return "Where is the " + a + " located relative to the " + b + "?";
  }
}

}  // namespace

MockBackend::MockBackend(MockOptions options) : options_(options) {
  if (options_.embedding_dim == 0) options_.embedding_dim = 1;
}

void MockBackend::push_script(MockReply reply) {
  std::lock_guard lock(mu_);
  script_.push_back(std::move(reply));
}

void MockBackend::add_transcript_entry(std::string stage, std::string unit, MockReply reply) {
  std::lock_guard lock(mu_);
  transcript_[{std::move(stage), std::move(unit)}].push_back(std::move(reply));
}

void MockBackend::load_transcript(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read mock transcript " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    const std::string where = path.filename().string() + " line " + std::to_string(lineno);
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("stage") || !j["stage"].is_string())
      throw DataError(where + ": expected {\"stage\", \"unit\", \"response\"|\"error\"}");
    const std::string unit = j.contains("unit") && j["unit"].is_string() ? j["unit"].get<std::string>() : "";
    if (j.contains("error") && j["error"].is_string()) {
      add_transcript_entry(j["stage"], unit, MockReply::fail(parse_failure(j["error"].get<std::string>())));
    } else if (j.contains("response") && j["response"].is_string()) {
      add_transcript_entry(j["stage"], unit, MockReply::ok(j["response"].get<std::string>()));
    } else {
      throw DataError(where + ": needs a string 'response' or 'error'");
    }
  }
}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t MockBackend::embed_calls() const {
  std::lock_guard lock(mu_);
  return embed_calls_;
}

Completion MockBackend::complete(const CompletionRequest& request) {
  std::optional<MockReply> reply;
  {
    std::lock_guard lock(mu_);
    ++calls_;
    if (!script_.empty()) {
      reply = std::move(script_.front());
      script_.pop_front();
    } else {
      auto key = split_tag(request.request_tag);
      auto it = transcript_.find(key);
      if (it != transcript_.end() && !it->second.empty()) {
        std::size_t& used = consumed_[key];
        reply = it->second[std::min(used, it->second.size() - 1)];
        ++used;
      }
    }
  }
  if (reply && reply->failure) throw BackendFailure(*reply->failure, "scripted mock failure");

  Completion c;
  if (reply) {
    c.text = std::move(reply->text);
  } else if (options_.mode == MockMode::echo) {
    c.text = "ECHO:" + text::hex64(text::fnv1a64(request.prompt, options_.seed));
  } else {
    c.text = synthesize(request);
  }
  c.usage = {whitespace_tokens(request.prompt), whitespace_tokens(c.text)};
  c.backend_id = id();
  return c;
}

std::string MockBackend::synthesize(const CompletionRequest& request) const {
  const auto [stage, unit] = split_tag(request.request_tag);
  const std::string_view prompt = request.prompt;
  const std::string_view context = tagged_block(prompt);
  const std::uint64_t base = text::fnv1a64(request.request_tag + "|" + std::to_string(request.temperature),
                                           text::fnv1a64(prompt, options_.seed));

  if (stage == "question_gen") {
    const auto words = content_words(context);
    const std::size_t n = requested_question_count(prompt);
    std::string out = "Here are the questions:\n";
    for (std::size_t k = 1; k <= n; ++k) {
      const std::uint64_t h = text::fnv1a64(std::to_string(k), base);
      out += std::to_string(k) + ". " + make_question(h, words) + "\n";
    }
    return out;
  }

  if (stage == "answer_distill") {
    const auto sents = sentences(context);
    const std::size_t ctx_end = context.empty() ? 0 : static_cast<std::size_t>(context.data() - prompt.data()) + context.size();
    const auto after = prompt.find("\n</", ctx_end);
    std::string out;
    std::size_t index = 0;
    std::size_t line_start = after == std::string_view::npos ? prompt.size() : after;
    while (line_start < prompt.size()) {
      auto nl = prompt.find('\n', line_start);
      if (nl == std::string_view::npos) nl = prompt.size();
      const auto line = prompt.substr(line_start, nl - line_start);
      line_start = nl + 1;
      if (line.substr(0, 3) != "Q: ") continue;
      const std::string_view question = line.substr(3);
      out += "Q: " + std::string(question) + "\nA: ";
      const bool capped = options_.answerable_per_call && index >= *options_.answerable_per_call;
      if (capped || sents.empty()) {
        out += "Unanswerable";
      } else {
        const std::uint64_t h = text::fnv1a64(question, options_.seed);
        out += "\"" + std::string(sents[h % sents.size()]) + "\"";
      }
      out += "\n\n";
      ++index;
    }
    return out;
  }

  if (stage == "summarization") {
    std::vector<std::string> attrs;
    const auto tmpl = prompt.find("Output JSON Template:");
    if (tmpl != std::string_view::npos) {
      const auto end = prompt.find("\n}", tmpl);
      std::size_t pos = tmpl;
      while ((pos = prompt.find('"', pos)) != std::string_view::npos && pos < end) {
        const auto close = prompt.find('"', pos + 1);
        if (close == std::string_view::npos) break;
        if (prompt.substr(close + 1, 3) == ": [") attrs.emplace_back(prompt.substr(pos + 1, close - pos - 1));
        pos = close + 1;
      }
    }
    const auto words = text::split_ws(context);
    if (attrs.empty()) {
      std::string para = "The record describes";
      for (std::size_t i = 0; i < std::min<std::size_t>(words.size(), 12); ++i) para += " " + std::string(words[i]);
      return para + ".";
    }
    ordered_json obj = ordered_json::object();
    for (std::size_t a = 0; a < attrs.size(); ++a) {
      std::vector<std::string> vals;
      const std::uint64_t h = text::fnv1a64(attrs[a], base);
      if (words.size() >= 2 && h % 5 != 0) {
        const std::size_t start = (h >> 8) % (words.size() - 1);
        std::string phrase = std::string(words[start]) + " " + std::string(words[start + 1]);
        vals.push_back(std::move(phrase));
      }
      obj[attrs[a]] = vals;
    }
    return "```json\n" + obj.dump(2) + "\n```";
  }

  return "ECHO:" + text::hex64(text::fnv1a64(prompt, options_.seed));
}

std::vector<double> MockBackend::embedding_for(std::string_view text_in) const {
  std::mt19937_64 rng(text::fnv1a64(text_in, options_.seed));
  std::vector<double> v(options_.embedding_dim);
  double norm = 0.0;
  for (auto& x : v) {
    x = static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  if (norm == 0.0) {
    v[0] = 1.0;
    return v;
  }
  for (auto& x : v) x /= norm;
  return v;
}

EmbeddingBatch MockBackend::embed(std::span<const std::string> texts, const std::string&) {
  std::optional<MockReply> reply;
  {
    std::lock_guard lock(mu_);
    ++embed_calls_;
    if (!script_.empty() && script_.front().failure) {
      reply = std::move(script_.front());
      script_.pop_front();
    }
  }
  if (reply) throw BackendFailure(*reply->failure, "scripted mock failure");
  EmbeddingBatch batch;
  for (const auto& t : texts) {
    batch.vectors.push_back(embedding_for(t));
    batch.usage.input_tokens += whitespace_tokens(t);
  }
  return batch;
}

}  // namespace clinqa::llm
