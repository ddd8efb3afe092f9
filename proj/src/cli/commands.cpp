#include <glob.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "clinqa/cli.hpp"

namespace clinqa::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string money(double usd) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "$%.4f", usd);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view body) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << body;
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<fs::path> out;
  if (rc == 0) {
    for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) throw DataError("cannot expand " + pattern);
  std::sort(out.begin(), out.end());
  return out;
}

struct ManifestSample {
  std::size_t pairs_per_doc = 0;
  std::vector<std::string> doc_ids;
  fs::path output_dir;
};

ManifestSample read_manifest(const fs::path& path, std::uint64_t seed) {
  try {
    const json j = json::parse(read_file(path));
    for (const auto& s : j.at("samples")) {
      if (s.at("seed").get<std::uint64_t>() != seed) continue;
      return {j.at("pairs_per_doc").get<std::size_t>(), s.at("doc_ids").get<std::vector<std::string>>(),
              fs::path(s.at("output_dir").get<std::string>())};
    }
  } catch (const json::exception& e) {
    throw DataError("bad manifest " + path.string() + ": " + e.what());
  }
  throw ConfigError("manifest " + path.string() + " has no sample for seed " + std::to_string(seed));
}

}  // namespace

fs::path cmd_generate(const RunConfig& config, std::ostream& out) {
  validate(config);
  const auto spec = parse_backend(config.backend);
  return cmd_generate(config, make_backend(spec, config.seed, config.mock_answerable_per_call), out);
}

fs::path cmd_generate(const RunConfig& input, std::shared_ptr<llm::Backend> backend, std::ostream& out) {
  validate(input);
  RunConfig config = input;
  const auto prices = price_table(config.prices);

  std::optional<ManifestSample> manifest;
  if (!config.manifest.empty()) {
    manifest = read_manifest(config.manifest, config.seed);
    config.questions_per_unit = manifest->pairs_per_doc;
  }
  const fs::path dir = manifest ? manifest->output_dir : config.out / config_hash(config);
  if (fs::exists(dir)) throw ConfigError("run directory " + dir.string() + " already exists");

  auto opts = gateway_options(parse_backend(config.backend), config.parallelism);
  if (backend->id() == "mock") opts.clock = [] { return std::int64_t{0}; };
  llm::Gateway gateway(backend, opts);

  generation::GenerationSettings settings;
  settings.dataset = config.dataset;
  settings.schema = config.schema.value_or(prompting::SchemaVariant::full);
  settings.model_id = config.model_id;
  settings.seed = config.seed;
  settings.parallelism = config.parallelism;

  generation::GenerationRun run;
  if (config.strategy == prompting::Strategy::gold_question) {
    const auto gold = corpus::read_squad(config.gold);
    auto groups = generation::gold_groups_from_squad(gold);
    if (config.docs) {
      std::vector<std::string> ids;
      for (const auto& g : groups) {
        if (std::find(ids.begin(), ids.end(), g.context.ref.doc_id) == ids.end()) ids.push_back(g.context.ref.doc_id);
      }
      if (*config.docs > ids.size()) {
        throw DataError("asked for " + std::to_string(*config.docs) + " documents but the gold file has " +
                        std::to_string(ids.size()));
      }
      const auto perm = corpus::sample_permutation(ids.size(), config.seed);
      std::vector<std::string> picked;
      for (std::size_t i = 0; i < *config.docs; ++i) picked.push_back(ids[perm[i]]);
      groups = generation::gold_groups_from_squad(gold, std::span<const std::string>(picked));
    }
    run = generation::answer_gold_questions(groups, gateway, settings);
  } else {
    const auto all = corpus::load_documents(config.corpus, config.corpus_format);
    std::vector<corpus::Document> docs;
    if (manifest) {
      docs = corpus::select_documents(all, manifest->doc_ids);
    } else if (config.docs) {
      docs = corpus::select_documents(all, corpus::sample_documents(all, *config.docs, config.seed).doc_ids);
    } else {
      docs = all;
    }
    if (config.dataset == prompting::Dataset::radqa) {
      run = generation::run_radqa_pipeline(docs, config.strategy, config.questions_per_unit, gateway, settings);
    } else {
      std::vector<corpus::Segment> segments;
      for (const auto& d : docs) {
        auto segs = corpus::segment_document(d, config.segment_words);
        segments.insert(segments.end(), segs.begin(), segs.end());
      }
      run = generation::run_mimic_pipeline(docs, segments, config.strategy, config.questions_per_unit, gateway,
                                           settings, {config.max_rounds, config.overgen_batch});
    }
  }
  run.run_id = dir.filename().string();

  const auto entries = gateway.ledger().entries();
  const double cost = llm::estimate_cost(entries, prices);
  generation::write_run(dir, run, gateway.ledger(), config_to_json(config));

  out << run.pairs.size() << " pairs\n";
  out << run.answerable_count() << " answerable, " << run.pairs.size() - run.answerable_count() << " unanswerable\n";
  out << entries.size() << " calls, estimated cost " << money(cost) << "\n";
  if (!run.warnings.empty()) out << run.warnings.size() << " warnings (see warnings.log)\n";
  out << "run directory: " << dir.string() << "\n";
  return dir;
}

std::size_t cmd_export(const fs::path& run_dir, const fs::path& out_file, corpus::Format format, std::ostream& out) {
  if (format != corpus::Format::squad_v2) {
    throw ConfigError("export supports squad_v2 only, not " + std::string(corpus::to_string(format)));
  }
  const auto run = generation::read_run(run_dir);
  const auto dataset = generation::to_squad(run);
  write_file(out_file, corpus::dump_squad(dataset));
  const std::size_t n = dataset.question_count();
  out << n << " questions written to " << out_file.string() << "\n";
  return n;
}

analysis::DiversityReport cmd_analyze(const AnalyzeOptions& options, std::ostream& out) {
  std::vector<analysis::QuestionRecord> records;
  std::string name;
  if (fs::is_directory(options.input)) {
    records = analysis::records_from_run(generation::read_run(options.input));
    name = options.input.filename().string();
    if (name.empty()) name = options.input.parent_path().filename().string();
  } else {
    records = analysis::records_from_squad(corpus::read_squad(options.input));
    name = options.input.stem().string();
  }
  if (records.empty()) throw DataError("no questions to analyze in " + options.input.string());

  const auto spec = parse_backend(options.backend);
  llm::Gateway gateway(make_backend(spec, options.seed), gateway_options(spec, options.parallelism));
  const analysis::Embedder embedder = [&](std::span<const std::string> texts) {
    std::vector<std::vector<double>> vecs;
    for (auto& e : gateway.embed(texts, "embed/" + name)) vecs.push_back(std::move(e.values));
    return vecs;
  };
  const auto report = analysis::analyze(records, embedder, {options.vocab_drops_stopwords});
  const std::pair<std::string, analysis::DiversityReport> row{name, report};
  const std::string table = analysis::report_table(std::span(&row, 1));
  write_file(options.out / (name + ".analysis.json"), analysis::report_to_json(report, name));
  write_file(options.out / (name + ".analysis.txt"), table);
  out << table;
  return report;
}

void cmd_evaluate(const EvaluateOptions& options, std::ostream& out) {
  if (options.decompose && options.labels.empty() && !options.labels_from_gold) {
    throw ConfigError("--decompose needs --labels FILE or --labels-from-gold");
  }
  if (options.predictions.empty() == options.seeds.empty()) {
    throw ConfigError("give either a predictions file or --seeds, not both or neither");
  }
  if (options.gold.empty()) throw ConfigError("no gold file given (--gold)");

  const auto gold = corpus::read_squad(options.gold);
  const auto golds = evaluation::gold_entries_from_squad(gold);
  std::optional<evaluation::LabelMap> labels;
  if (options.decompose) {
    labels = options.labels.empty() ? evaluation::labels_from_gold(gold)
                                    : evaluation::parse_labels(read_file(options.labels));
  }
  const evaluation::LabelMap* label_ptr = labels ? &*labels : nullptr;

  const auto files = options.seeds.empty() ? std::vector<fs::path>{options.predictions} : expand_glob(options.seeds);
  if (files.empty()) throw DataError("no prediction files match " + options.seeds);

  Warnings warnings;
  std::vector<std::pair<std::string, evaluation::EvalReport>> rows;
  std::vector<evaluation::EvalReport> reports;
  for (const auto& f : files) {
    const auto preds = evaluation::load_predictions(f, golds, &warnings);
    reports.push_back(evaluation::evaluate(preds, golds, label_ptr, &warnings));
    rows.emplace_back(f.stem().string(), reports.back());
  }
  for (const auto& w : warnings.entries()) out << "warning: " << w << "\n";

  const std::string table = evaluation::report_table(rows);
  out << table;
  ordered_json j;
  j["reports"] = ordered_json::object();
  for (const auto& [name, r] : rows) j["reports"][name] = ordered_json::parse(evaluation::report_to_json(r));
  std::string summary_text;
  if (!options.seeds.empty()) {
    const auto summary = evaluation::aggregate_seeds(reports);
    summary_text = evaluation::summary_table(summary);
    out << "\n" << summary_text;
    j["aggregate"] = ordered_json::parse(evaluation::summary_to_json(summary));
  }
  if (!options.out.empty()) {
    write_file(options.out / "evaluation.json", j.dump(2) + "\n");
    write_file(options.out / "evaluation.txt", summary_text.empty() ? table : table + "\n" + summary_text);
  }
}

std::vector<fs::path> cmd_scale_plan(const ScalePlanOptions& options, std::ostream& out) {
  const auto docs = corpus::load_documents(options.corpus, options.format);
  const auto manifests = generation::build_scale_plan(options.plan, docs, options.out / "runs");
  std::vector<fs::path> written;
  for (const auto& m : manifests) {
    const fs::path p = options.out / (m.name + ".json");
    write_file(p, generation::manifest_to_json(m));
    written.push_back(p);
  }
  out << written.size() << " manifests written to " << options.out.string() << "\n";
  return written;
}

double cmd_cost(std::span<const fs::path> ledgers, const fs::path& prices, std::ostream& out) {
  if (ledgers.empty()) throw ConfigError("no ledger files given");
  const auto table = price_table(prices);
  double total = 0.0;
  for (const auto& path : ledgers) {
    const fs::path file = fs::is_directory(path) ? path / "ledger.jsonl" : path;
    const auto entries = llm::UsageLedger::read_jsonl(file);
    const double cost = llm::estimate_cost(entries, table);
    std::int64_t in = 0, outp = 0;
    for (const auto& e : entries) {
      in += e.input_tokens;
      outp += e.output_tokens;
    }
    out << file.string() << ": " << entries.size() << " calls, " << in << " input / " << outp
        << " output tokens, " << money(cost) << "\n";
    total += cost;
  }
  if (ledgers.size() > 1) out << "total: " << money(total) << "\n";
  return total;
}

}  // namespace clinqa::cli
