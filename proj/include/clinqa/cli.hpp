#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clinqa/analysis.hpp"
#include "clinqa/corpus.hpp"
#include "clinqa/evaluation.hpp"
#include "clinqa/generation.hpp"
#include "clinqa/llm_gateway.hpp"
#include "clinqa/prompting.hpp"

namespace clinqa::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kBackend = 3, kData = 4 };

int exit_code_for(const std::exception& e);

struct RunConfig {
  prompting::Dataset dataset = prompting::Dataset::radqa;
  prompting::Strategy strategy = prompting::Strategy::direct_instruction;
  std::optional<prompting::SchemaVariant> schema;
  std::string model_id = "gpt-4o-2024-05-13";
  std::size_t questions_per_unit = 5;
  std::uint64_t seed = 1;
  std::size_t parallelism = 4;
  // "live", "mock" or "mock:<transcript.jsonl>"
  std::string backend = "mock";
  fs::path corpus;
  corpus::Format corpus_format = corpus::Format::jsonl;
  // sample size; all documents when unset
  std::optional<std::size_t> docs;
  // SQuAD-v2 file whose questions are answered in gold_question mode
  fs::path gold;
  // scale-plan manifest; its sample for `seed` replaces `docs`
  fs::path manifest;
  fs::path out = "runs";
  fs::path prices;
  std::size_t max_rounds = 3;
  std::size_t overgen_batch = 10;
  std::size_t segment_words = 500;
  // synthetic mock only: answers per distillation call before "Unanswerable"
  std::optional<std::size_t> mock_answerable_per_call;
};

// Applies the keys of a JSON config object onto `config`.
void apply_config_json(RunConfig& config, std::string_view json_text);
RunConfig load_config(const fs::path& path);
void validate(const RunConfig& config);
std::string config_to_json(const RunConfig& config);
// Hex digest of the output-relevant settings; names the run directory.
std::string config_hash(const RunConfig& config);

struct BackendSpec {
  bool live = false;
  fs::path transcript;
};

BackendSpec parse_backend(std::string_view spec);
std::shared_ptr<llm::Backend> make_backend(const BackendSpec& spec, std::uint64_t seed,
                                           std::optional<std::size_t> answerable_per_call = std::nullopt);
llm::GatewayOptions gateway_options(const BackendSpec& spec, std::size_t parallelism);
llm::PriceTable price_table(const fs::path& overrides);

// Runs the dataset recipe and writes a fresh run directory, returned.
fs::path cmd_generate(const RunConfig& config, std::ostream& out);
// Same, on a caller-provided backend.
fs::path cmd_generate(const RunConfig& config, std::shared_ptr<llm::Backend> backend, std::ostream& out);

// Returns the number of questions written.
std::size_t cmd_export(const fs::path& run_dir, const fs::path& out_file, corpus::Format format, std::ostream& out);

struct AnalyzeOptions {
  fs::path input;  // run directory or SQuAD-v2 file
  fs::path out = "analysis";
  std::string backend = "mock";
  std::uint64_t seed = 1;
  std::size_t parallelism = 4;
  bool vocab_drops_stopwords = false;
};

analysis::DiversityReport cmd_analyze(const AnalyzeOptions& options, std::ostream& out);

struct EvaluateOptions {
  fs::path predictions;
  // glob of per-seed prediction files, aggregated when set
  std::string seeds;
  fs::path gold;
  bool decompose = false;
  fs::path labels;
  bool labels_from_gold = false;
  fs::path out;
};

void cmd_evaluate(const EvaluateOptions& options, std::ostream& out);

struct ScalePlanOptions {
  fs::path corpus;
  corpus::Format format = corpus::Format::jsonl;
  fs::path out = "scale";
  generation::ScalePlan plan;
};

std::vector<fs::path> cmd_scale_plan(const ScalePlanOptions& options, std::ostream& out);

double cmd_cost(std::span<const fs::path> ledgers, const fs::path& prices, std::ostream& out);

// Full command line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace clinqa::cli
