#include <CLI11.hpp>

#include "clinqa/cli.hpp"

namespace clinqa::cli {

namespace {

std::vector<std::size_t> parse_counts(const std::string& csv, const char* flag) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    auto comma = csv.find(',', start);
    if (comma == std::string::npos) comma = csv.size();
    const std::string item = csv.substr(start, comma - start);
    try {
      std::size_t used = 0;
      const auto v = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError(std::string(flag) + ": '" + item + "' is not a number");
    }
    start = comma + 1;
  }
  return out;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Synthetic clinical QA data: generation, export, analysis and evaluation", "clinqa"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Run a generation recipe into a fresh run directory");
  std::string config_path, dataset, strategy, schema, backend, corpus_path, corpus_format, gold, manifest, out_dir,
      prices, model;
  std::size_t docs = 0, q = 0, parallelism = 0, answerable_per_call = 0;
  std::uint64_t seed = 0;
  gen->add_option("--config", config_path, "JSON config file; flags override it");
  auto* o_dataset = gen->add_option("--dataset", dataset, "radqa or mimicqa");
  auto* o_strategy = gen->add_option("--strategy", strategy, "question generation strategy");
  auto* o_schema = gen->add_option("--schema", schema, "summary schema: full, incomplete or none");
  auto* o_docs = gen->add_option("--docs", docs, "number of documents to sample");
  auto* o_q = gen->add_option("--questions-per-unit", q, "questions per document or segment");
  auto* o_seed = gen->add_option("--seed", seed, "sampling and mock seed");
  auto* o_backend = gen->add_option("--backend", backend, "live, mock or mock:<transcript.jsonl>");
  auto* o_par = gen->add_option("--parallelism", parallelism, "concurrent model calls");
  auto* o_out = gen->add_option("--out", out_dir, "parent directory of run directories");
  auto* o_corpus = gen->add_option("--corpus", corpus_path, "corpus path");
  auto* o_format = gen->add_option("--format", corpus_format, "jsonl, plain_text_dir or squad_v2");
  auto* o_gold = gen->add_option("--gold", gold, "SQuAD-v2 gold file for gold_question mode");
  auto* o_manifest = gen->add_option("--manifest", manifest, "scale-plan manifest to run");
  auto* o_prices = gen->add_option("--prices", prices, "price table overrides (JSON)");
  auto* o_model = gen->add_option("--model", model, "model id");
  auto* o_apc = gen->add_option("--mock-answerable-per-call", answerable_per_call,
                                "synthetic mock: answers per distillation call");

  // export
  auto* exp = app.add_subcommand("export", "Export a run as training data");
  std::string run_dir, export_out, export_format = "squad_v2";
  exp->add_option("run_dir", run_dir, "run directory")->required();
  exp->add_option("--out,-o", export_out, "output file")->required();
  exp->add_option("--format", export_format, "output format");

  // analyze
  auto* ana = app.add_subcommand("analyze", "Question diversity and type analysis");
  AnalyzeOptions analyze_opts;
  std::string analyze_input, analyze_out = "analysis";
  ana->add_option("input", analyze_input, "run directory or SQuAD-v2 file")->required();
  ana->add_option("--out", analyze_out, "report directory");
  ana->add_option("--backend", analyze_opts.backend, "embedding backend: live, mock");
  ana->add_option("--seed", analyze_opts.seed, "mock seed");
  ana->add_option("--parallelism", analyze_opts.parallelism, "concurrent embedding calls");
  ana->add_flag("--vocab-drops-stopwords", analyze_opts.vocab_drops_stopwords, "count vocabulary without stopwords");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Score predictions against a gold file");
  EvaluateOptions eval_opts;
  std::string preds, eval_gold, labels, eval_out;
  ev->add_option("predictions", preds, "predictions JSON");
  ev->add_option("--gold", eval_gold, "SQuAD-v2 gold file")->required();
  ev->add_option("--seeds", eval_opts.seeds, "glob of per-seed prediction files to aggregate");
  ev->add_flag("--decompose", eval_opts.decompose, "break results down by question type");
  ev->add_option("--labels", labels, "question type labels (JSON)");
  ev->add_flag("--labels-from-gold", eval_opts.labels_from_gold, "derive question types from the gold file");
  ev->add_option("--out", eval_out, "report directory");

  // scale-plan
  auto* sp = app.add_subcommand("scale-plan", "Write scaling experiment manifests");
  ScalePlanOptions plan_opts;
  std::string plan_corpus, plan_format = "jsonl", plan_out = "scale", doc_counts, pairs_per_doc, seeds;
  sp->add_option("--corpus", plan_corpus, "corpus path")->required();
  sp->add_option("--format", plan_format, "corpus format");
  sp->add_option("--out", plan_out, "manifest directory");
  auto* o_counts = sp->add_option("--doc-counts", doc_counts, "comma-separated document counts");
  auto* o_ppd = sp->add_option("--pairs-per-doc", pairs_per_doc, "comma-separated pairs per document");
  auto* o_seeds = sp->add_option("--seeds", seeds, "comma-separated seeds");

  // cost
  auto* co = app.add_subcommand("cost", "Estimate spend from usage ledgers");
  std::vector<std::string> ledgers;
  std::string cost_prices;
  co->add_option("ledgers", ledgers, "ledger.jsonl files or run directories")->required();
  co->add_option("--prices", cost_prices, "price table overrides (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (gen->parsed()) {
      RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
      if (o_dataset->count()) c.dataset = prompting::parse_dataset(dataset);
      if (o_strategy->count()) c.strategy = prompting::parse_strategy(strategy);
      if (o_schema->count()) c.schema = prompting::parse_schema_variant(schema);
      if (o_docs->count()) c.docs = docs;
      if (o_q->count()) c.questions_per_unit = q;
      if (o_seed->count()) c.seed = seed;
      if (o_backend->count()) c.backend = backend;
      if (o_par->count()) c.parallelism = parallelism;
      if (o_out->count()) c.out = out_dir;
      if (o_corpus->count()) c.corpus = corpus_path;
      if (o_format->count()) c.corpus_format = corpus::parse_format(corpus_format);
      if (o_gold->count()) c.gold = gold;
      if (o_manifest->count()) c.manifest = manifest;
      if (o_prices->count()) c.prices = prices;
      if (o_model->count()) c.model_id = model;
      if (o_apc->count()) c.mock_answerable_per_call = answerable_per_call;
      cmd_generate(c, out);
    } else if (exp->parsed()) {
      cmd_export(run_dir, export_out, corpus::parse_format(export_format), out);
    } else if (ana->parsed()) {
      analyze_opts.input = analyze_input;
      analyze_opts.out = analyze_out;
      cmd_analyze(analyze_opts, out);
    } else if (ev->parsed()) {
      eval_opts.predictions = preds;
      eval_opts.gold = eval_gold;
      eval_opts.labels = labels;
      eval_opts.out = eval_out;
      cmd_evaluate(eval_opts, out);
    } else if (sp->parsed()) {
      plan_opts.corpus = plan_corpus;
      plan_opts.format = corpus::parse_format(plan_format);
      plan_opts.out = plan_out;
      if (o_counts->count()) plan_opts.plan.doc_counts = parse_counts(doc_counts, "--doc-counts");
      if (o_ppd->count()) plan_opts.plan.pairs_per_doc = parse_counts(pairs_per_doc, "--pairs-per-doc");
      if (o_seeds->count()) {
        plan_opts.plan.seeds.clear();
        for (auto s : parse_counts(seeds, "--seeds")) plan_opts.plan.seeds.push_back(s);
      }
      cmd_scale_plan(plan_opts, out);
    } else if (co->parsed()) {
      std::vector<fs::path> paths(ledgers.begin(), ledgers.end());
      cmd_cost(paths, cost_prices, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kOk;
}

}  // namespace clinqa::cli
