#include <fstream>
#include <map>

#include <json.hpp>

#include "clinqa/generation.hpp"
#include "clinqa/text.hpp"

namespace clinqa::generation {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

void write_file(const std::filesystem::path& path, std::string_view body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << body;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw DataError(path.filename().string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::string context_key(std::string_view doc_id, std::string_view section) {
  return std::string(doc_id) + "|" + std::string(section);
}

}  // namespace

std::string pair_to_json_line(const QAPair& pair, const Context& context) {
  ordered_json j;
  j["id"] = pair.id;
  j["question"] = pair.question;
  j["doc_id"] = pair.context.doc_id;
  j["section"] = pair.context.section;
  j["context_char_start"] = pair.context.char_start;
  j["context_char_end"] = pair.context.char_end;
  if (pair.answer) {
    j["answer_text"] = pair.answer->text;
    j["answer_start"] = text::byte_to_char(context.text, pair.answer->char_start);
  } else {
    j["answer_text"] = nullptr;
    j["answer_start"] = nullptr;
  }
  j["unanswerable"] = !pair.answer.has_value();
  j["strategy"] = prompting::to_string(pair.provenance.strategy);
  j["model_id"] = pair.provenance.model_id;
  j["seed"] = pair.provenance.seed;
  j["prompt_ids"] = pair.provenance.prompt_ids;
  j["temperatures"] = pair.provenance.temperatures;
  return j.dump();
}

void write_run(const std::filesystem::path& dir, const GenerationRun& run, const llm::UsageLedger& ledger,
               std::string_view manifest_json) {
  std::filesystem::create_directories(dir);

  ordered_json manifest;
  manifest["run_id"] = run.run_id;
  manifest["dataset"] = prompting::to_string(run.dataset);
  manifest["strategy"] = prompting::to_string(run.strategy);
  manifest["model_id"] = run.model_id;
  manifest["seed"] = run.seed;
  manifest["questions_per_unit"] = run.questions_per_unit;
  manifest["doc_ids"] = run.doc_ids;
  manifest["pair_count"] = run.pairs.size();
  manifest["answerable_count"] = run.answerable_count();
  manifest["config"] = manifest_json.empty() ? ordered_json::object() : ordered_json::parse(manifest_json);
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");

  std::string pairs;
  for (const auto& p : run.pairs) {
    const Context* ctx = run.find_context(p.context);
    if (ctx == nullptr) throw DataError("pair " + p.id + " has no context");
    pairs += pair_to_json_line(p, *ctx) + "\n";
  }
  write_file(dir / "pairs.jsonl", pairs);

  std::string contexts;
  for (const auto& c : run.contexts) {
    ordered_json j;
    j["doc_id"] = c.ref.doc_id;
    j["section"] = c.ref.section;
    j["context_char_start"] = c.ref.char_start;
    j["context_char_end"] = c.ref.char_end;
    j["text"] = c.text;
    contexts += j.dump() + "\n";
  }
  write_file(dir / "contexts.jsonl", contexts);

  std::string summaries;
  for (const auto& s : run.summaries) {
    ordered_json j;
    j["doc_id"] = s.doc_id;
    j["variant"] = prompting::to_string(s.variant);
    ordered_json values = ordered_json::object();
    for (const auto& [attr, vals] : s.values) values[attr] = vals;
    j["values"] = values;
    j["raw"] = s.raw;
    summaries += j.dump() + "\n";
  }
  write_file(dir / "summaries.jsonl", summaries);

  ledger.write_jsonl(dir / "ledger.jsonl");

  std::string log;
  for (const auto& w : run.warnings) log += w + "\n";
  write_file(dir / "warnings.log", log);
}

GenerationRun read_run(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a run directory: " + dir.string());
  GenerationRun run;
  try {
    std::ifstream in(dir / "manifest.json", std::ios::binary);
    if (!in) throw DataError("missing manifest.json in " + dir.string());
    const json m = json::parse(in);
    run.run_id = m.value("run_id", "");
    run.dataset = prompting::parse_dataset(m.at("dataset").get<std::string>());
    run.strategy = prompting::parse_strategy(m.at("strategy").get<std::string>());
    run.model_id = m.value("model_id", "");
    run.seed = m.value("seed", std::uint64_t{0});
    run.questions_per_unit = m.value("questions_per_unit", std::size_t{0});
    run.doc_ids = m.value("doc_ids", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw DataError("bad manifest.json in " + dir.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("bad manifest.json in " + dir.string() + ": " + e.what());
  }

  std::map<std::string, std::size_t> index;
  try {
    for (const auto& j : read_jsonl(dir / "contexts.jsonl")) {
      Context c;
      c.ref.doc_id = j.at("doc_id").get<std::string>();
      c.ref.section = j.at("section").get<std::string>();
      c.ref.char_start = j.at("context_char_start").get<std::size_t>();
      c.ref.char_end = j.at("context_char_end").get<std::size_t>();
      c.text = j.at("text").get<std::string>();
      index[context_key(c.ref.doc_id, c.ref.section)] = run.contexts.size();
      run.contexts.push_back(std::move(c));
    }

    for (const auto& j : read_jsonl(dir / "pairs.jsonl")) {
      QAPair p;
      p.id = j.value("id", "");
      p.question = j.at("question").get<std::string>();
      p.context.doc_id = j.at("doc_id").get<std::string>();
      p.context.section = j.at("section").get<std::string>();
      p.context.char_start = j.at("context_char_start").get<std::size_t>();
      p.context.char_end = j.at("context_char_end").get<std::size_t>();
      const auto it = index.find(context_key(p.context.doc_id, p.context.section));
      if (it == index.end()) throw DataError("pair " + p.id + " refers to an unknown context");
      const Context& ctx = run.contexts[it->second];
      if (!j.at("answer_text").is_null()) {
        const auto start = j.at("answer_start").get<std::size_t>();
        const auto byte = text::char_to_byte(ctx.text, start);
        if (!byte) throw DataError("pair " + p.id + " has answer_start past its context");
        p.answer = Answer{j.at("answer_text").get<std::string>(), *byte};
      }
      p.provenance.strategy = prompting::parse_strategy(j.at("strategy").get<std::string>());
      p.provenance.model_id = j.value("model_id", "");
      p.provenance.seed = j.value("seed", std::uint64_t{0});
      p.provenance.prompt_ids = j.value("prompt_ids", std::vector<std::string>{});
      p.provenance.temperatures = j.value("temperatures", std::vector<double>{});
      run.pairs.push_back(std::move(p));
    }

    if (std::filesystem::exists(dir / "summaries.jsonl")) {
      for (const auto& j : read_jsonl(dir / "summaries.jsonl")) {
        SummaryRecord s;
        s.doc_id = j.at("doc_id").get<std::string>();
        s.variant = prompting::parse_schema_variant(j.at("variant").get<std::string>());
        for (const auto& [attr, vals] : j.at("values").items()) {
          s.values.emplace_back(attr, vals.get<std::vector<std::string>>());
        }
        s.raw = j.value("raw", "");
        run.summaries.push_back(std::move(s));
      }
    }
  } catch (const json::exception& e) {
    throw DataError("bad run file in " + dir.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("bad run file in " + dir.string() + ": " + e.what());
  }

  if (std::ifstream log(dir / "warnings.log"); log) {
    std::string line;
    while (std::getline(log, line)) {
      if (!line.empty()) run.warnings.push_back(line);
    }
  }
  return run;
}

corpus::SquadDataset to_squad(const GenerationRun& run) {
  corpus::SquadDataset out;
  std::map<std::string, std::size_t> article_of;
  for (const auto& ctx : run.contexts) {
    corpus::SquadParagraph para;
    para.context = ctx.text;
    para.context_id = context_key(ctx.ref.doc_id, ctx.ref.section);
    std::size_t k = 0;
    for (const auto& p : run.pairs) {
      if (p.context.doc_id != ctx.ref.doc_id || p.context.section != ctx.ref.section) continue;
      corpus::SquadQuestion q;
      q.id = p.id.empty() ? *para.context_id + "|" + std::to_string(k) : p.id;
      q.question = p.question;
      if (p.answer) {
        const auto& a = *p.answer;
        if (a.char_start > ctx.text.size() || ctx.text.compare(a.char_start, a.text.size(), a.text) != 0) {
          throw DataError("pair " + q.id + " answer does not match its context span");
        }
        q.answers.push_back({a.text, text::byte_to_char(ctx.text, a.char_start)});
      } else {
        q.is_impossible = true;
      }
      para.qas.push_back(std::move(q));
      ++k;
    }
    if (para.qas.empty()) continue;
    auto [it, inserted] = article_of.emplace(ctx.ref.doc_id, out.data.size());
    if (inserted) out.data.push_back({ctx.ref.doc_id, {}});
    out.data[it->second].paragraphs.push_back(std::move(para));
  }
  return out;
}

}  // namespace clinqa::generation
