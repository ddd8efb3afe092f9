#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clinqa/warnings.hpp"

namespace clinqa::prompting {

enum class Dataset { radqa, mimicqa };
enum class Stage { question_gen, summarization, answer_distill };
enum class Strategy {
  direct_instruction,
  temp_anneal,
  question_prefix,
  no_overlap,
  sum_direct,
  sum_no_overlap,
  sum_question_prefix,
  // provenance marker for gold questions answered by the model; not a
  // question generation strategy
  gold_question,
};
enum class SchemaVariant { full, incomplete, none };

std::string_view to_string(Dataset d);
std::string_view to_string(Stage s);
std::string_view to_string(Strategy s);
std::string_view to_string(SchemaVariant v);
Dataset parse_dataset(std::string_view name);
Strategy parse_strategy(std::string_view name);
SchemaVariant parse_schema_variant(std::string_view name);

// sum_* strategies run a summarization call before question generation.
bool requires_summary(Strategy s);

struct SummarySchema {
  Dataset dataset = Dataset::radqa;
  SchemaVariant variant = SchemaVariant::full;
  std::vector<std::string> attributes;
  std::optional<std::size_t> max_values_per_attribute;
};

// Throws ConfigError for combinations without a template (mimicqa/incomplete).
SummarySchema summary_schema(Dataset dataset, SchemaVariant variant);

struct PromptTemplate {
  std::string id;
  Dataset dataset;
  Stage stage;
  std::optional<Strategy> strategy;
  std::optional<SchemaVariant> schema;
  std::string_view body;
  // true for templates written for this toolkit rather than taken from the
  // published prompt set
  bool inferred = false;

  // Distinct {{name}} placeholders in order of first appearance.
  std::vector<std::string> placeholders() const;
  // Relative golden file path, e.g. "radqa/question_gen.no_overlap.txt".
  std::string golden_path() const;
};

std::span<const PromptTemplate> all_templates();
const PromptTemplate& question_template(Dataset dataset, Strategy strategy);
const PromptTemplate& summarization_template(Dataset dataset, SchemaVariant variant);
const PromptTemplate& distillation_template(Dataset dataset);

using Vars = std::map<std::string, std::string, std::less<>>;

// Exact {{placeholder}} substitution. Throws ConfigError when a placeholder
// has no value or vars holds a name the body does not use.
std::string render(const PromptTemplate& tmpl, const Vars& vars);

// Value for {{input_questions}}: one "Q: ..." line per question.
std::string format_questions(std::span<const std::string> questions);

// Items of an "N." / "N)" indexed list. Throws ParseError when nothing is
// indexed and CountMismatch when expected_n is given and not met.
std::vector<std::string> parse_indexed_list(std::string_view text, std::optional<std::size_t> expected_n = {});

struct QAItem {
  std::string question;
  std::optional<std::string> answer;  // nullopt: the model said "Unanswerable"

  bool operator==(const QAItem&) const = default;
};

std::vector<QAItem> parse_qa_block(std::string_view text);

struct SummaryRecord {
  std::string doc_id;
  SchemaVariant variant = SchemaVariant::full;
  // attribute -> values, in schema order; empty for SchemaVariant::none
  std::vector<std::pair<std::string, std::vector<std::string>>> values;
  std::string raw;

  const std::vector<std::string>* find(std::string_view attribute) const;
};

SummaryRecord parse_summary(std::string_view text, const SummarySchema& schema, Warnings* warnings = nullptr);
std::string render_summary_as_context(const SummaryRecord& record);

}  // namespace clinqa::prompting
