#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clinqa/corpus.hpp"
#include "clinqa/llm_gateway.hpp"
#include "clinqa/prompting.hpp"
#include "clinqa/warnings.hpp"

namespace clinqa::generation {

using prompting::Dataset;
using prompting::QAItem;
using prompting::SchemaVariant;
using prompting::Strategy;
using prompting::SummaryRecord;

// Where a QA context lives in its source document. The interval is in code
// points, the unit used by every file this toolkit writes.
struct ContextRef {
  std::string doc_id;
  std::string section;  // "FINDINGS", "segment-2", or a gold paragraph id
  std::size_t char_start = 0;
  std::size_t char_end = 0;

  bool operator==(const ContextRef&) const = default;
};

struct Context {
  ContextRef ref;
  std::string text;
};

struct Answer {
  std::string text;
  std::size_t char_start = 0;  // byte offset into the context text
};

struct Provenance {
  Strategy strategy = Strategy::direct_instruction;
  std::string model_id;
  std::uint64_t seed = 0;
  std::vector<std::string> prompt_ids;
  std::vector<double> temperatures;
};

struct QAPair {
  std::string id;
  std::string question;
  ContextRef context;
  std::optional<Answer> answer;  // nullopt: unanswerable
  Provenance provenance;
};

struct GenerationSettings {
  Dataset dataset = Dataset::radqa;
  SchemaVariant schema = SchemaVariant::full;
  std::string model_id = "gpt-4o-2024-05-13";
  std::uint64_t seed = 0;
  int max_output_tokens = 1024;
  std::size_t parallelism = 1;
};

struct GenerationRun {
  std::string run_id;
  Dataset dataset = Dataset::radqa;
  Strategy strategy = Strategy::direct_instruction;
  std::string model_id;
  std::uint64_t seed = 0;
  std::vector<std::string> doc_ids;
  std::size_t questions_per_unit = 0;
  std::vector<QAPair> pairs;
  std::vector<Context> contexts;
  std::vector<SummaryRecord> summaries;
  std::vector<std::string> warnings;

  const Context* find_context(const ContextRef& ref) const;
  std::size_t answerable_count() const;
};

struct Alignment {
  std::size_t char_start = 0;  // bytes into the context
  std::size_t length = 0;
  int tier = 1;  // 1 exact, 2 case-insensitive, 3 whitespace/punctuation tolerant
};

// Locates a quoted answer in its context. Ties go to the first occurrence.
std::optional<Alignment> align_answer(std::string_view answer, std::string_view context);

// One summarization call at temperature 0, re-asked once on a parse failure.
// Returns nullopt (with a warning) when both attempts fail.
std::optional<SummaryRecord> summarize_document(std::string_view unit_id, std::string_view text,
                                                const prompting::SummarySchema& schema, llm::Gateway& gateway,
                                                const GenerationSettings& settings, Warnings& warnings);

// Renders the strategy's prompt, parses the indexed list, re-asks once on a
// count mismatch and then keeps at most n items. `input` is the document
// text, or the rendered summary for sum_* strategies.
std::vector<std::string> generate_questions(std::string_view input, Strategy strategy, std::size_t n,
                                            llm::Gateway& gateway, const GenerationSettings& settings,
                                            std::string_view unit_id, double temperature, Warnings& warnings);

// One batched distillation call. The result is positionally aligned with
// `questions`; entries the model did not answer become unanswerable.
std::vector<QAItem> distill_answers(std::span<const std::string> questions, std::string_view context,
                                    llm::Gateway& gateway, const GenerationSettings& settings,
                                    std::string_view unit_id, Warnings& warnings);

// Per report: optional summary, q_per_doc questions, then one distillation
// per present FINDINGS/IMPRESSION section.
GenerationRun run_radqa_pipeline(std::span<const corpus::Document> docs, Strategy strategy, std::size_t q_per_doc,
                                 llm::Gateway& gateway, const GenerationSettings& settings);

struct MimicOptions {
  std::size_t max_rounds = 3;
  std::size_t overgen_batch = 10;
};

// Per segment: over-generate and keep answerable pairs until the quota is met
// or the rounds run out.
GenerationRun run_mimic_pipeline(std::span<const corpus::Document> docs, std::span<const corpus::Segment> segments,
                                 Strategy strategy, std::size_t q_per_segment, llm::Gateway& gateway,
                                 const GenerationSettings& settings, MimicOptions options = {});

struct GoldQuestion {
  std::string qid;
  std::string question;
};

struct GoldGroup {
  Context context;
  std::vector<GoldQuestion> questions;
};

// Groups the questions of a SQuAD-v2 file by paragraph. When `doc_ids` is
// given only those paragraphs are kept, in that order.
std::vector<GoldGroup> gold_groups_from_squad(const corpus::SquadDataset& dataset,
                                              std::optional<std::span<const std::string>> doc_ids = std::nullopt);

GenerationRun answer_gold_questions(std::span<const GoldGroup> groups, llm::Gateway& gateway,
                                    const GenerationSettings& settings);

// Scaling experiments.
struct ScalePlan {
  std::vector<std::size_t> doc_counts{8, 16, 32, 64, 128, 256, 803};
  std::vector<std::size_t> pairs_per_doc{5, 10, 20};
  std::vector<std::uint64_t> seeds{1, 2, 3};
};

struct ScaleManifest {
  std::string name;
  std::size_t doc_count = 0;
  std::size_t pairs_per_doc = 0;
  std::vector<corpus::CorpusSample> samples;  // one per seed
  std::vector<std::filesystem::path> output_dirs;  // one per seed
};

std::vector<ScaleManifest> build_scale_plan(const ScalePlan& plan, std::span<const corpus::Document> corpus,
                                            const std::filesystem::path& out_root);
std::string manifest_to_json(const ScaleManifest& manifest);

// Run directory I/O: manifest.json, pairs.jsonl, contexts.jsonl,
// summaries.jsonl, ledger.jsonl, warnings.log.
void write_run(const std::filesystem::path& dir, const GenerationRun& run, const llm::UsageLedger& ledger,
               std::string_view manifest_json);
GenerationRun read_run(const std::filesystem::path& dir);
std::string pair_to_json_line(const QAPair& pair, const Context& context);

// SQuAD-v2 training data: one article per document, one paragraph per
// context. Throws DataError naming the first pair whose span does not match
// its context.
corpus::SquadDataset to_squad(const GenerationRun& run);

}  // namespace clinqa::generation
