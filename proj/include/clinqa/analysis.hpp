#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clinqa/corpus.hpp"
#include "clinqa/generation.hpp"

namespace clinqa::analysis {

// Fixed 179-word English stopword list (the NLTK "english" list).
std::span<const std::string_view> stopwords();
bool is_stopword(std::string_view token);

// Lowercased, punctuation replaced by spaces, split on whitespace.
std::vector<std::string> tokens(std::string_view s);
// tokens() minus stopwords.
std::vector<std::string> content_tokens(std::string_view s);

// True iff the question shares at least one content token with the context.
bool classify_overlap(std::string_view question, std::string_view context);

enum class TypeCode { OA, OU, NOA, NOU };
inline constexpr std::array<TypeCode, 4> kTypeCodes{TypeCode::OA, TypeCode::OU, TypeCode::NOA, TypeCode::NOU};

std::string_view to_string(TypeCode t);
TypeCode type_code(bool overlap, bool answerable);

struct QuestionLabel {
  bool overlap = false;
  bool answerable = false;
  TypeCode type = TypeCode::NOU;
};

// A question with everything needed to label it. A synthetic question asked
// against several sections of one document appears once, with all of them.
struct QuestionRecord {
  std::string id;
  std::string doc_id;
  std::string question;
  std::vector<std::string> contexts;
  bool answerable = false;
};

// One record per distinct (doc_id, question); answerable when any of its
// contexts produced an answer.
std::vector<QuestionRecord> records_from_run(const generation::GenerationRun& run);
// Gold questions; answerable = !is_impossible.
std::vector<QuestionRecord> records_from_squad(const corpus::SquadDataset& dataset);

// Throws DataError for a record without a context.
std::vector<QuestionLabel> label_questions(std::span<const QuestionRecord> records);

// Percentage per type code, indexed like kTypeCodes; all zero when empty.
std::array<double, 4> type_distribution(std::span<const QuestionLabel> labels);

struct QuestionGroup {
  std::string doc_id;
  std::vector<std::string> questions;
};

std::vector<QuestionGroup> group_by_doc(std::span<const QuestionRecord> records);

// Maps texts to embedding vectors, one per text and in order.
using Embedder = std::function<std::vector<std::vector<double>>(std::span<const std::string>)>;

double cosine(std::span<const double> a, std::span<const double> b);

struct DiversityOptions {
  // vocabulary counted over content tokens instead of all tokens
  bool vocab_drops_stopwords = false;
};

struct DiversityReport {
  std::size_t n_questions = 0;
  double avg_length = 0.0;
  std::size_t vocab_size = 0;
  std::optional<double> aps;  // nullopt when no document has two questions
  double aqp = 0.0;
  std::optional<std::array<double, 4>> type_distribution;
};

// Throws std::invalid_argument for an empty group list.
DiversityReport diversity_report(std::span<const QuestionGroup> groups, const Embedder& embedder,
                                 DiversityOptions options = {});

// Diversity metrics plus the type distribution of the labelled records.
DiversityReport analyze(std::span<const QuestionRecord> records, const Embedder& embedder,
                        DiversityOptions options = {});

std::string report_to_json(const DiversityReport& report, std::string_view name);
// Aligned text table with one row per named report.
std::string report_table(std::span<const std::pair<std::string, DiversityReport>> rows);

}  // namespace clinqa::analysis
