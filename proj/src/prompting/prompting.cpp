#include "clinqa/prompting.hpp"

#include <algorithm>
#include <array>

#include <json.hpp>

#include "clinqa/error.hpp"
#include "clinqa/text.hpp"
#include "templates.hpp"

namespace clinqa::prompting {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::array<std::pair<Strategy, std::string_view>, 8> kStrategyNames{{
    {Strategy::direct_instruction, "direct_instruction"},
    {Strategy::temp_anneal, "temp_anneal"},
    {Strategy::question_prefix, "question_prefix"},
    {Strategy::no_overlap, "no_overlap"},
    {Strategy::sum_direct, "sum_direct"},
    {Strategy::sum_no_overlap, "sum_no_overlap"},
    {Strategy::sum_question_prefix, "sum_question_prefix"},
    {Strategy::gold_question, "gold_question"},
}};

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

template <typename Fn>
void for_each_placeholder(std::string_view body, Fn&& fn) {
  std::size_t pos = 0;
  while ((pos = body.find("{{", pos)) != std::string_view::npos) {
    const std::size_t close = body.find("}}", pos + 2);
    if (close == std::string_view::npos) return;
    const std::string_view name = body.substr(pos + 2, close - pos - 2);
    if (!name.empty() && std::all_of(name.begin(), name.end(), is_placeholder_char)) {
      fn(pos, close + 2, name);
      pos = close + 2;
    } else {
      pos += 2;
    }
  }
}

// Strips markdown emphasis that models wrap around list markers and labels.
std::string_view strip_emphasis(std::string_view s) {
  s = text::trim(s);
  while (s.size() >= 2 && (s.substr(0, 2) == "**" || s.substr(0, 2) == "__")) s = text::trim(s.substr(2));
  while (s.size() >= 2 && (s.substr(s.size() - 2) == "**" || s.substr(s.size() - 2) == "__"))
    s = text::trim(s.substr(0, s.size() - 2));
  return s;
}

std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t nl = s.find('\n', start);
    if (nl == std::string_view::npos) nl = s.size();
    std::string_view line = s.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

// Returns the text after a "Q:"-style label, or nullopt if the line does not
// start with it.
std::optional<std::string_view> after_label(std::string_view line, char label) {
  std::string_view s = text::trim(line);
  while (s.size() >= 2 && (s.substr(0, 2) == "**" || s.substr(0, 2) == "__")) s.remove_prefix(2);
  if (s.size() < 2) return std::nullopt;
  if ((s[0] != label && s[0] != label + ('a' - 'A')) || s[1] != ':') return std::nullopt;
  s.remove_prefix(2);
  while (s.size() >= 2 && (s.substr(0, 2) == "**" || s.substr(0, 2) == "__")) s.remove_prefix(2);
  return text::trim(s);
}

constexpr std::string_view kOpenCurly = "\xE2\x80\x9C";
constexpr std::string_view kCloseCurly = "\xE2\x80\x9D";

std::optional<std::string> answer_outcome(std::string_view raw) {
  std::string_view content = text::trim(raw);
  std::string_view bare = content;
  auto strip_quote_edges = [&] {
    bool changed = true;
    while (changed && !bare.empty()) {
      changed = false;
      for (std::string_view q : {std::string_view("\""), std::string_view("'"), kOpenCurly, kCloseCurly}) {
        if (bare.size() >= q.size() && bare.substr(0, q.size()) == q) bare.remove_prefix(q.size()), changed = true;
        if (bare.size() >= q.size() && bare.substr(bare.size() - q.size()) == q)
          bare.remove_suffix(q.size()), changed = true;
      }
      if (!bare.empty() && bare.back() == '.') bare.remove_suffix(1), changed = true;
      bare = text::trim(bare);
    }
  };
  strip_quote_edges();
  if (bare.empty() || text::iequals(bare, "unanswerable")) return std::nullopt;

  std::size_t open = std::string_view::npos;
  std::size_t open_len = 0;
  for (std::size_t i = 0; i < content.size(); ++i) {
    if (content[i] == '"') {
      open = i, open_len = 1;
      break;
    }
    if (content.substr(i, kOpenCurly.size()) == kOpenCurly) {
      open = i, open_len = kOpenCurly.size();
      break;
    }
  }
  std::size_t close = std::string_view::npos;
  for (std::size_t i = content.size(); i-- > 0;) {
    if (content[i] == '"') {
      close = i;
      break;
    }
    if (i + kCloseCurly.size() <= content.size() && content.substr(i, kCloseCurly.size()) == kCloseCurly) {
      close = i;
      break;
    }
  }
  if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
    std::string_view quoted = text::trim(content.substr(open + open_len, close - open - open_len));
    if (quoted.empty()) return std::nullopt;
    return std::string(quoted);
  }
  return std::string(content);
}

// Candidate objects: every balanced {...} region, string-literal aware.
std::optional<std::string_view> balanced_object_at(std::string_view s, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return s.substr(start, i - start + 1);
    }
  }
  return std::nullopt;
}

// Removes commas directly before a closing bracket (outside strings), the
// one JSON deviation the published template itself contains.
std::string drop_trailing_commas(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      out.push_back(c);
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < s.size() && text::is_space(static_cast<unsigned char>(s[j]))) ++j;
      if (j < s.size() && (s[j] == '}' || s[j] == ']')) continue;
    }
    out.push_back(c);
  }
  return out;
}

std::optional<json> first_json_object(std::string_view s) {
  for (std::size_t pos = s.find('{'); pos != std::string_view::npos; pos = s.find('{', pos + 1)) {
    const auto candidate = balanced_object_at(s, pos);
    if (!candidate) continue;
    for (const std::string& attempt : {std::string(*candidate), drop_trailing_commas(*candidate)}) {
      json parsed = json::parse(attempt, nullptr, false);
      if (!parsed.is_discarded() && parsed.is_object()) return parsed;
    }
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(Dataset d) { return d == Dataset::radqa ? "radqa" : "mimicqa"; }

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::question_gen: return "question_gen";
    case Stage::summarization: return "summarization";
    case Stage::answer_distill: return "answer_distill";
  }
  return "?";
}

std::string_view to_string(Strategy s) {
  for (const auto& [k, name] : kStrategyNames)
    if (k == s) return name;
  return "?";
}

std::string_view to_string(SchemaVariant v) {
  switch (v) {
    case SchemaVariant::full: return "full";
    case SchemaVariant::incomplete: return "incomplete";
    case SchemaVariant::none: return "none";
  }
  return "?";
}

Dataset parse_dataset(std::string_view name) {
  if (name == "radqa") return Dataset::radqa;
  if (name == "mimicqa") return Dataset::mimicqa;
  throw ConfigError("unknown dataset '" + std::string(name) + "' (expected radqa or mimicqa)");
}

Strategy parse_strategy(std::string_view name) {
  for (const auto& [k, n] : kStrategyNames)
    if (n == name) return k;
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

SchemaVariant parse_schema_variant(std::string_view name) {
  if (name == "full") return SchemaVariant::full;
  if (name == "incomplete") return SchemaVariant::incomplete;
  if (name == "none") return SchemaVariant::none;
  throw ConfigError("unknown schema variant '" + std::string(name) + "' (expected full, incomplete or none)");
}

bool requires_summary(Strategy s) {
  return s == Strategy::sum_direct || s == Strategy::sum_no_overlap || s == Strategy::sum_question_prefix;
}

SummarySchema summary_schema(Dataset dataset, SchemaVariant variant) {
  SummarySchema schema;
  schema.dataset = dataset;
  schema.variant = variant;
  if (variant == SchemaVariant::none) return schema;
  if (dataset == Dataset::radqa) {
    if (variant == SchemaVariant::full) {
      schema.attributes = {"symptoms", "medical_conditions", "areas_examined", "patient_medical_history",
                           "diagnostic_techniques"};
    } else {
      schema.attributes = {"symptoms", "medical_conditions", "patient_medical_history"};
    }
    return schema;
  }
  if (variant == SchemaVariant::incomplete) throw ConfigError("mimicqa has no incomplete summary schema");
  schema.attributes = {"patient_history", "diagnosis", "symptoms", "medical_conditions", "exam_results"};
  schema.max_values_per_attribute = 5;
  return schema;
}

std::vector<std::string> PromptTemplate::placeholders() const {
  std::vector<std::string> out;
  for_each_placeholder(body, [&](std::size_t, std::size_t, std::string_view name) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.emplace_back(name);
  });
  return out;
}

std::string PromptTemplate::golden_path() const { return id + ".txt"; }

std::span<const PromptTemplate> all_templates() { return detail::builtin_templates(); }

const PromptTemplate& question_template(Dataset dataset, Strategy strategy) {
  if (strategy == Strategy::gold_question) throw ConfigError("gold_question does not generate questions");
  // temperature annealing reuses the direct instruction prompt
  const Strategy lookup = strategy == Strategy::temp_anneal ? Strategy::direct_instruction : strategy;
  for (const auto& t : all_templates()) {
    if (t.dataset == dataset && t.stage == Stage::question_gen && t.strategy == lookup) return t;
  }
  throw ConfigError("no question template for " + std::string(to_string(dataset)) + "/" +
                    std::string(to_string(strategy)));
}

const PromptTemplate& summarization_template(Dataset dataset, SchemaVariant variant) {
  for (const auto& t : all_templates()) {
    if (t.dataset == dataset && t.stage == Stage::summarization && t.schema == variant) return t;
  }
  throw ConfigError("no summarization template for " + std::string(to_string(dataset)) + "/" +
                    std::string(to_string(variant)));
}

const PromptTemplate& distillation_template(Dataset dataset) {
  for (const auto& t : all_templates()) {
    if (t.dataset == dataset && t.stage == Stage::answer_distill) return t;
  }
  throw ConfigError("no distillation template for " + std::string(to_string(dataset)));
}

std::string render(const PromptTemplate& tmpl, const Vars& vars) {
  const auto names = tmpl.placeholders();
  for (const auto& [key, value] : vars) {
    if (std::find(names.begin(), names.end(), key) == names.end())
      throw ConfigError("template " + tmpl.id + " has no placeholder '" + key + "'");
  }
  std::string out;
  out.reserve(tmpl.body.size() + 256);
  std::size_t last = 0;
  for_each_placeholder(tmpl.body, [&](std::size_t begin, std::size_t end, std::string_view name) {
    auto it = vars.find(name);
    if (it == vars.end())
      throw ConfigError("template " + tmpl.id + ": missing value for placeholder '" + std::string(name) + "'");
    out.append(tmpl.body.substr(last, begin - last));
    out.append(it->second);
    last = end;
  });
  out.append(tmpl.body.substr(last));
  return out;
}

std::string format_questions(std::span<const std::string> questions) {
  std::string out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    if (i > 0) out += '\n';
    out += "Q: ";
    out += questions[i];
  }
  return out;
}

std::vector<std::string> parse_indexed_list(std::string_view text_in, std::optional<std::size_t> expected_n) {
  std::vector<std::string> items;
  for (std::string_view line : split_lines(text_in)) {
    std::string_view s = text::trim(line);
    while (s.size() >= 2 && (s.substr(0, 2) == "**" || s.substr(0, 2) == "__")) s.remove_prefix(2);
    if (!s.empty() && (s[0] == '-' || s[0] == '*' || s[0] == '#')) s = text::trim(s.substr(1));
    std::size_t digits = 0;
    while (digits < s.size() && digits < 4 && s[digits] >= '0' && s[digits] <= '9') ++digits;
    if (digits == 0 || digits >= s.size()) continue;
    if (s[digits] != '.' && s[digits] != ')') continue;
    std::string_view rest = s.substr(digits + 1);
    if (!rest.empty() && !text::is_space(static_cast<unsigned char>(rest[0])) && rest.substr(0, 2) != "**")
      continue;
    rest = strip_emphasis(rest);
    if (rest.empty()) continue;
    items.emplace_back(rest);
  }
  if (items.empty()) throw ParseError("no indexed list items found");
  if (expected_n && items.size() != *expected_n) throw CountMismatch(std::move(items), *expected_n);
  return items;
}

std::vector<QAItem> parse_qa_block(std::string_view text_in) {
  enum class State { preamble, question, answer };
  std::vector<QAItem> out;
  State state = State::preamble;
  std::string question;
  std::string answer;

  auto finish_answer = [&] {
    out.push_back({std::move(question), answer_outcome(answer)});
    question.clear();
    answer.clear();
  };

  for (std::string_view line : split_lines(text_in)) {
    if (auto q = after_label(line, 'Q')) {
      if (state == State::question) throw ParseError("question without answer: " + question);
      if (state == State::answer) finish_answer();
      question = std::string(*q);
      state = State::question;
      continue;
    }
    if (auto a = after_label(line, 'A')) {
      if (state != State::question) continue;
      answer = std::string(*a);
      state = State::answer;
      continue;
    }
    if (state == State::question) {
      const auto t = text::trim(line);
      if (!t.empty()) {
        if (!question.empty()) question += ' ';
        question += t;
      }
    } else if (state == State::answer) {
      answer += '\n';
      answer += line;
    }
  }
  if (state == State::question) throw ParseError("question without answer: " + question);
  if (state == State::answer) finish_answer();
  if (out.empty()) throw ParseError("no Q/A pairs found");
  for (auto& item : out) item.question = std::string(strip_emphasis(item.question));
  return out;
}

const std::vector<std::string>* SummaryRecord::find(std::string_view attribute) const {
  for (const auto& [k, v] : values)
    if (k == attribute) return &v;
  return nullptr;
}

SummaryRecord parse_summary(std::string_view text_in, const SummarySchema& schema, Warnings* warnings) {
  SummaryRecord record;
  record.variant = schema.variant;
  record.raw = std::string(text_in);
  if (schema.variant == SchemaVariant::none) {
    record.raw = std::string(text::trim(text_in));
    return record;
  }
  const auto obj = first_json_object(text_in);
  if (!obj) throw ParseError("no JSON object found in summary output");

  for (const auto& attr : schema.attributes) {
    std::vector<std::string> vals;
    auto it = obj->find(attr);
    if (it == obj->end()) {
      warn(warnings, "summary", "missing attribute '" + attr + "', treated as empty");
    } else if (it->is_null()) {
      // null reads as "no information"
    } else if (it->is_string()) {
      if (!text::trim(it->get_ref<const std::string&>()).empty()) vals.push_back(it->get<std::string>());
    } else if (it->is_array()) {
      for (const auto& v : *it) {
        if (!v.is_string()) throw ParseError("value for '" + attr + "' must be text or a list of texts");
        if (text::trim(v.get_ref<const std::string&>()).empty()) {
          warn(warnings, "summary", "empty value dropped from '" + attr + "'");
          continue;
        }
        vals.push_back(v.get<std::string>());
      }
    } else {
      throw ParseError("value for '" + attr + "' must be text or a list of texts");
    }
    if (schema.max_values_per_attribute && vals.size() > *schema.max_values_per_attribute) {
      warn(warnings, "summary",
           "'" + attr + "' truncated to " + std::to_string(*schema.max_values_per_attribute) + " values");
      vals.resize(*schema.max_values_per_attribute);
    }
    record.values.emplace_back(attr, std::move(vals));
  }
  for (const auto& [key, value] : obj->items()) {
    if (std::find(schema.attributes.begin(), schema.attributes.end(), key) == schema.attributes.end())
      warn(warnings, "summary", "unexpected attribute '" + key + "' dropped");
  }
  return record;
}

std::string render_summary_as_context(const SummaryRecord& record) {
  if (record.variant == SchemaVariant::none) return std::string(text::trim(record.raw));
  ordered_json obj = ordered_json::object();
  for (const auto& [attr, vals] : record.values) obj[attr] = vals;
  return obj.dump(2);
}

}  // namespace clinqa::prompting
