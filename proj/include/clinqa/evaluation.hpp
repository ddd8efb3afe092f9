#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clinqa/analysis.hpp"
#include "clinqa/corpus.hpp"
#include "clinqa/warnings.hpp"

namespace clinqa::evaluation {

// Half-open interval; byte offsets into the context in memory.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
};

struct GoldAnswer {
  std::string text;
  std::size_t char_start = 0;
};

struct GoldEntry {
  std::string qid;
  std::string question;
  std::string context_id;
  std::string context;
  std::vector<GoldAnswer> answers;  // empty: unanswerable

  bool unanswerable() const { return answers.empty(); }
};

struct Prediction {
  std::string qid;
  std::optional<std::string> text;  // nullopt: unanswerable
  std::optional<Span> span;
};

// SQuAD answer normalization: lowercase, drop punctuation, drop the
// articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view s);

// Each throws DataError when the qids differ.
int exact_match(const Prediction& pred, const GoldEntry& gold);
double token_f1(const Prediction& pred, const GoldEntry& gold);
// Text-only predictions are aligned to the context first; an unalignable one
// scores 0 and is reported to `warnings`.
int reference_overlap(const Prediction& pred, const GoldEntry& gold, Warnings* warnings = nullptr);

struct Metrics {
  double em = 0.0;  // percentages
  double f1 = 0.0;
  double ro = 0.0;
  std::size_t n = 0;
};

struct EvalReport {
  Metrics overall;
  // indexed like analysis::kTypeCodes
  std::optional<std::array<Metrics, 4>> per_type;
};

using LabelMap = std::map<std::string, analysis::QuestionLabel, std::less<>>;

// Every gold qid needs exactly one prediction (DataError otherwise).
// Predictions for unknown qids are ignored with a warning.
EvalReport evaluate(std::span<const Prediction> preds, std::span<const GoldEntry> golds,
                    const LabelMap* labels = nullptr, Warnings* warnings = nullptr);

struct SeedAggregate {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::size_t k = 0;
};

SeedAggregate aggregate(std::span<const double> values);

struct MetricAggregates {
  SeedAggregate em;
  SeedAggregate f1;
  SeedAggregate ro;
  std::size_t n = 0;
};

struct SeedSummary {
  MetricAggregates overall;
  std::optional<std::array<MetricAggregates, 4>> per_type;
};

// Throws DataError when the reports do not share n and type partition.
SeedSummary aggregate_seeds(std::span<const EvalReport> reports);

// Gold entries in file order. Throws DataError for answers whose span does
// not match the context.
std::vector<GoldEntry> gold_entries_from_squad(const corpus::SquadDataset& dataset);

// Predictions file: {qid: {"text": ..., "char_start": int|null,
// "unanswerable": bool}}; a bare string value is accepted as text only.
// char_start is a code point offset into the gold context.
std::vector<Prediction> parse_predictions(std::string_view json_text, std::span<const GoldEntry> golds,
                                          Warnings* warnings = nullptr);
std::vector<Prediction> load_predictions(const std::filesystem::path& path, std::span<const GoldEntry> golds,
                                         Warnings* warnings = nullptr);
std::string dump_predictions(std::span<const Prediction> preds, std::span<const GoldEntry> golds);

// {qid: "OA"|"OU"|"NOA"|"NOU"}
LabelMap parse_labels(std::string_view json_text);
LabelMap labels_from_gold(const corpus::SquadDataset& dataset);
std::string dump_labels(const LabelMap& labels);

std::string report_to_json(const EvalReport& report);
std::string summary_to_json(const SeedSummary& summary);
std::string report_table(std::span<const std::pair<std::string, EvalReport>> rows);
std::string summary_table(const SeedSummary& summary);

}  // namespace clinqa::evaluation
