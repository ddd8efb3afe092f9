#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <thread>

#include "clinqa/generation.hpp"
#include "clinqa/text.hpp"

namespace clinqa::generation {

namespace {

// Runs fn(0..count-1) on up to `parallelism` threads and rethrows the first
// failure by index once every worker is done.
template <typename Fn>
void for_each_unit(std::size_t count, std::size_t parallelism, Fn&& fn) {
  const std::size_t workers = std::min(std::max<std::size_t>(parallelism, 1), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Per-unit output, merged in unit order so parallel runs stay deterministic.
struct UnitResult {
  std::vector<QAPair> pairs;
  std::vector<Context> contexts;
  std::optional<SummaryRecord> summary;
  Warnings warnings;
};

void rethrow_if_fatal(const llm::BackendError& e) {
  if (e.kind() == llm::FailureKind::auth || e.kind() == llm::FailureKind::invalid_request) throw e;
}

std::string question_key(std::string_view q) {
  std::string out;
  bool space = false;
  for (char ch : q) {
    const auto c = static_cast<unsigned char>(ch);
    if (text::is_punct(c)) continue;
    if (text::is_space(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(c < 0x80 && c >= 'A' && c <= 'Z' ? static_cast<char>(c | 0x20) : ch);
  }
  return out;
}

std::optional<Answer> aligned_answer(const std::optional<std::string>& quoted, std::string_view context,
                                     std::string_view where, Warnings& warnings) {
  if (!quoted || text::trim(*quoted).empty()) return std::nullopt;
  const auto hit = align_answer(*quoted, context);
  if (!hit) {
    warnings.add("alignment", std::string(where) + ": quote not found in context, marked unanswerable: \"" +
                                  *quoted + "\"");
    return std::nullopt;
  }
  return Answer{std::string(context.substr(hit->char_start, hit->length)), hit->char_start};
}

ContextRef make_ref(const corpus::Document& doc, std::string section, std::size_t begin, std::size_t end) {
  return ContextRef{doc.id, std::move(section), text::byte_to_char(doc.text, begin),
                    text::byte_to_char(doc.text, end)};
}

void number_pairs(std::vector<QAPair>& pairs, const ContextRef& ref, std::size_t first) {
  for (std::size_t k = first; k < pairs.size(); ++k) {
    pairs[k].id = ref.doc_id + "|" + ref.section + "|" + std::to_string(k - first);
  }
}

GenerationRun merge(std::vector<UnitResult>& units, GenerationRun run) {
  for (auto& u : units) {
    std::move(u.pairs.begin(), u.pairs.end(), std::back_inserter(run.pairs));
    std::move(u.contexts.begin(), u.contexts.end(), std::back_inserter(run.contexts));
    if (u.summary) run.summaries.push_back(std::move(*u.summary));
    for (auto& w : u.warnings.entries()) run.warnings.push_back(std::move(w));
  }
  return run;
}

GenerationRun run_header(const GenerationSettings& settings, Strategy strategy, std::size_t q) {
  GenerationRun run;
  run.dataset = settings.dataset;
  run.strategy = strategy;
  run.model_id = settings.model_id;
  run.seed = settings.seed;
  run.questions_per_unit = q;
  return run;
}

}  // namespace

const Context* GenerationRun::find_context(const ContextRef& ref) const {
  for (const auto& c : contexts) {
    if (c.ref.doc_id == ref.doc_id && c.ref.section == ref.section) return &c;
  }
  return nullptr;
}

std::size_t GenerationRun::answerable_count() const {
  return static_cast<std::size_t>(
      std::count_if(pairs.begin(), pairs.end(), [](const QAPair& p) { return p.answer.has_value(); }));
}

std::optional<SummaryRecord> summarize_document(std::string_view unit_id, std::string_view text_in,
                                                const prompting::SummarySchema& schema, llm::Gateway& gateway,
                                                const GenerationSettings& settings, Warnings& warnings) {
  const auto& tmpl = prompting::summarization_template(schema.dataset, schema.variant);
  llm::CompletionRequest req;
  req.model_id = settings.model_id;
  req.prompt = prompting::render(tmpl, {{"input_context", std::string(text_in)}});
  req.temperature = 0.0;
  req.max_output_tokens = settings.max_output_tokens;
  req.request_tag = "summarization/" + std::string(unit_id);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto reply = gateway.complete(req);
    try {
      auto record = prompting::parse_summary(reply.text, schema, &warnings);
      record.doc_id = std::string(unit_id);
      return record;
    } catch (const ParseError&) {
    }
  }
  warnings.add("skip", std::string(unit_id) + ": summary unparseable after re-ask");
  return std::nullopt;
}

std::vector<std::string> generate_questions(std::string_view input, Strategy strategy, std::size_t n,
                                            llm::Gateway& gateway, const GenerationSettings& settings,
                                            std::string_view unit_id, double temperature, Warnings& warnings) {
  if (n == 0) throw std::invalid_argument("generate_questions: n must be at least 1");
  const auto& tmpl = prompting::question_template(settings.dataset, strategy);
  prompting::Vars vars{{"question_num", std::to_string(n)}};
  vars[prompting::requires_summary(strategy) ? "input_summary" : "input_context"] = std::string(input);

  llm::CompletionRequest req;
  req.model_id = settings.model_id;
  req.prompt = prompting::render(tmpl, vars);
  req.temperature = temperature;
  req.max_output_tokens = settings.max_output_tokens;
  req.request_tag = "question_gen/" + std::string(unit_id);

  std::vector<std::string> found;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto reply = gateway.complete(req);
    try {
      return prompting::parse_indexed_list(reply.text, n);
    } catch (const CountMismatch& e) {
      if (e.items().size() >= found.size()) found = e.items();
    } catch (const ParseError&) {
    }
  }
  if (found.empty()) throw ParseError("no indexed questions for " + std::string(unit_id) + " after re-ask");
  warnings.add("count", std::string(unit_id) + ": asked for " + std::to_string(n) + " questions, got " +
                            std::to_string(found.size()));
  if (found.size() > n) found.resize(n);
  return found;
}

std::vector<QAItem> distill_answers(std::span<const std::string> questions, std::string_view context,
                                    llm::Gateway& gateway, const GenerationSettings& settings,
                                    std::string_view unit_id, Warnings& warnings) {
  if (questions.empty()) throw std::invalid_argument("distill_answers: no questions");
  const auto& tmpl = prompting::distillation_template(settings.dataset);
  llm::CompletionRequest req;
  req.model_id = settings.model_id;
  req.prompt = prompting::render(
      tmpl, {{"input_context", std::string(context)}, {"input_questions", prompting::format_questions(questions)}});
  req.temperature = 0.0;
  req.max_output_tokens = settings.max_output_tokens;
  req.request_tag = "answer_distill/" + std::string(unit_id);

  std::vector<QAItem> parsed;
  bool matched = false;
  for (int attempt = 0; attempt < 2 && !matched; ++attempt) {
    const auto reply = gateway.complete(req);
    try {
      auto items = prompting::parse_qa_block(reply.text);
      matched = items.size() == questions.size();
      if (matched || items.size() > parsed.size()) parsed = std::move(items);
    } catch (const ParseError&) {
    }
  }
  if (!matched) {
    warnings.add("distill", std::string(unit_id) + ": expected " + std::to_string(questions.size()) +
                                " answers, got " + std::to_string(parsed.size()) +
                                "; unmatched questions marked unanswerable");
  }

  std::vector<QAItem> out;
  out.reserve(questions.size());
  for (std::size_t i = 0; i < questions.size(); ++i) {
    QAItem item{questions[i], std::nullopt};
    if (i < parsed.size()) {
      item.answer = parsed[i].answer;
      if (question_key(parsed[i].question) != question_key(questions[i])) {
        warnings.add("distill", std::string(unit_id) + ": answer " + std::to_string(i + 1) +
                                    " restates a different question");
      }
    }
    out.push_back(std::move(item));
  }
  return out;
}

GenerationRun run_radqa_pipeline(std::span<const corpus::Document> docs, Strategy strategy, std::size_t q_per_doc,
                                 llm::Gateway& gateway, const GenerationSettings& settings) {
  if (strategy == Strategy::gold_question) throw ConfigError("gold_question is not a generation strategy");
  if (q_per_doc == 0) throw std::invalid_argument("run_radqa_pipeline: q_per_doc must be at least 1");
  const bool summarize = prompting::requires_summary(strategy);
  const auto schema = summarize ? std::optional(prompting::summary_schema(settings.dataset, settings.schema))
                                : std::nullopt;
  const auto temps = strategy == Strategy::temp_anneal && !docs.empty() ? llm::anneal_temperatures(docs.size())
                                                                        : std::vector<double>(docs.size(), 0.0);
  const auto& q_tmpl = prompting::question_template(settings.dataset, strategy);
  const auto& d_tmpl = prompting::distillation_template(settings.dataset);

  std::vector<UnitResult> units(docs.size());
  for_each_unit(docs.size(), settings.parallelism, [&](std::size_t di) {
    const auto& doc = docs[di];
    auto& out = units[di];
    const auto sections = corpus::extract_sections(doc, corpus::radqa_section_headers(), &out.warnings);
    if (sections.empty()) {
      out.warnings.add("skip", doc.id + ": no FINDINGS or IMPRESSION section");
      return;
    }
    try {
      Provenance prov{strategy, settings.model_id, settings.seed, {}, {}};
      std::string input = doc.text;
      if (summarize) {
        out.summary = summarize_document(doc.id, doc.text, *schema, gateway, settings, out.warnings);
        if (!out.summary) return;
        input = prompting::render_summary_as_context(*out.summary);
        prov.prompt_ids.push_back(prompting::summarization_template(settings.dataset, settings.schema).id);
        prov.temperatures.push_back(0.0);
      }
      const auto questions =
          generate_questions(input, strategy, q_per_doc, gateway, settings, doc.id, temps[di], out.warnings);
      prov.prompt_ids.push_back(q_tmpl.id);
      prov.temperatures.push_back(temps[di]);
      prov.prompt_ids.push_back(d_tmpl.id);
      prov.temperatures.push_back(0.0);

      for (const auto& sec : sections) {
        const auto context = doc.slice(sec.char_start, sec.char_end);
        const std::string unit = doc.id + "/" + sec.name;
        const auto items = distill_answers(questions, context, gateway, settings, unit, out.warnings);
        Context ctx{make_ref(doc, sec.name, sec.char_start, sec.char_end), std::string(context)};
        const std::size_t first = out.pairs.size();
        for (const auto& item : items) {
          out.pairs.push_back(
              QAPair{{}, item.question, ctx.ref, aligned_answer(item.answer, context, unit, out.warnings), prov});
        }
        number_pairs(out.pairs, ctx.ref, first);
        out.contexts.push_back(std::move(ctx));
      }
    } catch (const llm::BackendError& e) {
      rethrow_if_fatal(e);
      out.pairs.clear();
      out.contexts.clear();
      out.warnings.add("skip", doc.id + ": " + e.what());
    } catch (const Error& e) {
      out.pairs.clear();
      out.contexts.clear();
      out.warnings.add("skip", doc.id + ": " + e.what());
    }
  });

  auto run = run_header(settings, strategy, q_per_doc);
  for (const auto& d : docs) run.doc_ids.push_back(d.id);
  return merge(units, std::move(run));
}

GenerationRun run_mimic_pipeline(std::span<const corpus::Document> docs, std::span<const corpus::Segment> segments,
                                 Strategy strategy, std::size_t q_per_segment, llm::Gateway& gateway,
                                 const GenerationSettings& settings, MimicOptions options) {
  if (strategy == Strategy::gold_question) throw ConfigError("gold_question is not a generation strategy");
  if (q_per_segment == 0) throw std::invalid_argument("run_mimic_pipeline: q_per_segment must be at least 1");
  if (options.max_rounds == 0 || options.overgen_batch == 0)
    throw std::invalid_argument("run_mimic_pipeline: rounds and batch size must be at least 1");
  std::map<std::string, const corpus::Document*, std::less<>> by_id;
  for (const auto& d : docs) by_id[d.id] = &d;
  for (const auto& s : segments) {
    if (!by_id.contains(s.doc_id)) throw DataError("segment refers to unknown document " + s.doc_id);
  }

  const bool summarize = prompting::requires_summary(strategy);
  const auto schema = summarize ? std::optional(prompting::summary_schema(settings.dataset, settings.schema))
                                : std::nullopt;
  const auto temps = strategy == Strategy::temp_anneal && !segments.empty()
                         ? llm::anneal_temperatures(segments.size())
                         : std::vector<double>(segments.size(), 0.0);
  const auto& q_tmpl = prompting::question_template(settings.dataset, strategy);
  const auto& d_tmpl = prompting::distillation_template(settings.dataset);

  std::vector<UnitResult> units(segments.size());
  for_each_unit(segments.size(), settings.parallelism, [&](std::size_t si) {
    const auto& seg = segments[si];
    const auto& doc = *by_id.find(seg.doc_id)->second;
    auto& out = units[si];
    const std::string section = "segment-" + std::to_string(seg.index);
    const std::string unit = doc.id + "/" + section;
    const auto context = doc.slice(seg.char_start, seg.char_end);
    Context ctx{make_ref(doc, section, seg.char_start, seg.char_end), std::string(context)};

    Provenance prov{strategy, settings.model_id, settings.seed, {}, {}};
    std::string input(context);
    try {
      if (summarize) {
        out.summary = summarize_document(unit, context, *schema, gateway, settings, out.warnings);
        if (!out.summary) return;
        input = prompting::render_summary_as_context(*out.summary);
        prov.prompt_ids.push_back(prompting::summarization_template(settings.dataset, settings.schema).id);
        prov.temperatures.push_back(0.0);
      }
    } catch (const llm::BackendError& e) {
      rethrow_if_fatal(e);
      out.warnings.add("skip", unit + ": " + e.what());
      return;
    }
    prov.prompt_ids.push_back(q_tmpl.id);
    prov.temperatures.push_back(temps[si]);
    prov.prompt_ids.push_back(d_tmpl.id);
    prov.temperatures.push_back(0.0);

    std::vector<std::string> seen;
    for (std::size_t round = 1; round <= options.max_rounds && out.pairs.size() < q_per_segment; ++round) {
      const std::string round_unit = unit + "/round-" + std::to_string(round);
      try {
        const auto questions = generate_questions(input, strategy, options.overgen_batch, gateway, settings,
                                                  round_unit, temps[si], out.warnings);
        const auto items = distill_answers(questions, context, gateway, settings, round_unit, out.warnings);
        for (const auto& item : items) {
          auto answer = aligned_answer(item.answer, context, round_unit, out.warnings);
          if (!answer) continue;
          auto key = question_key(item.question);
          if (std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
          seen.push_back(std::move(key));
          out.pairs.push_back(QAPair{{}, item.question, ctx.ref, std::move(answer), prov});
        }
      } catch (const llm::BackendError& e) {
        rethrow_if_fatal(e);
        out.warnings.add("round", round_unit + ": " + e.what());
      } catch (const Error& e) {
        out.warnings.add("round", round_unit + ": " + e.what());
      }
    }
    if (out.pairs.size() < q_per_segment) {
      out.warnings.add("shortfall", unit + ": " + std::to_string(out.pairs.size()) + " of " +
                                        std::to_string(q_per_segment) + " answerable pairs after " +
                                        std::to_string(options.max_rounds) + " rounds");
    }
    if (out.pairs.size() > q_per_segment) out.pairs.resize(q_per_segment);
    number_pairs(out.pairs, ctx.ref, 0);
    out.contexts.push_back(std::move(ctx));
  });

  auto run = run_header(settings, strategy, q_per_segment);
  for (const auto& d : docs) run.doc_ids.push_back(d.id);
  return merge(units, std::move(run));
}

std::vector<GoldGroup> gold_groups_from_squad(const corpus::SquadDataset& dataset,
                                              std::optional<std::span<const std::string>> doc_ids) {
  const auto ids = corpus::squad_paragraph_ids(dataset);
  std::vector<GoldGroup> all;
  std::size_t k = 0;
  for (const auto& article : dataset.data) {
    for (std::size_t p = 0; p < article.paragraphs.size(); ++p) {
      const auto& para = article.paragraphs[p];
      const std::string& pid = ids[k++];
      GoldGroup g;
      // "<doc>|<section>" ids come from our own exports; anything else is
      // keyed by article and paragraph position
      if (const auto bar = pid.find('|'); bar != std::string::npos) {
        g.context.ref.doc_id = pid.substr(0, bar);
        g.context.ref.section = pid.substr(bar + 1);
      } else {
        g.context.ref.doc_id = article.title.empty() ? pid : article.title;
        g.context.ref.section = "p" + std::to_string(p);
      }
      g.context.ref.char_start = 0;
      g.context.ref.char_end = text::utf8_length(para.context);
      g.context.text = para.context;
      for (const auto& q : para.qas) g.questions.push_back({q.id, q.question});
      all.push_back(std::move(g));
    }
  }
  if (!doc_ids) return all;
  std::vector<GoldGroup> picked;
  for (const auto& id : *doc_ids) {
    bool any = false;
    for (const auto& g : all) {
      if (g.context.ref.doc_id == id) {
        picked.push_back(g);
        any = true;
      }
    }
    if (!any) throw DataError("gold file has no paragraph for document " + id);
  }
  return picked;
}

GenerationRun answer_gold_questions(std::span<const GoldGroup> groups, llm::Gateway& gateway,
                                    const GenerationSettings& settings) {
  const auto& d_tmpl = prompting::distillation_template(settings.dataset);
  std::vector<UnitResult> units(groups.size());
  for_each_unit(groups.size(), settings.parallelism, [&](std::size_t gi) {
    const auto& g = groups[gi];
    auto& out = units[gi];
    out.contexts.push_back(g.context);
    if (g.questions.empty()) return;
    const std::string unit = g.context.ref.doc_id + "/" + g.context.ref.section;
    std::vector<std::string> texts;
    for (const auto& q : g.questions) texts.push_back(q.question);
    Provenance prov{Strategy::gold_question, settings.model_id, settings.seed, {d_tmpl.id}, {0.0}};
    try {
      const auto items = distill_answers(texts, g.context.text, gateway, settings, unit, out.warnings);
      for (std::size_t i = 0; i < items.size(); ++i) {
        out.pairs.push_back(QAPair{g.questions[i].qid, texts[i], g.context.ref,
                                   aligned_answer(items[i].answer, g.context.text, unit, out.warnings), prov});
      }
    } catch (const llm::BackendError& e) {
      rethrow_if_fatal(e);
      out.warnings.add("skip", unit + ": " + e.what());
    }
  });

  auto run = run_header(settings, Strategy::gold_question, 0);
  for (const auto& g : groups) {
    if (std::find(run.doc_ids.begin(), run.doc_ids.end(), g.context.ref.doc_id) == run.doc_ids.end())
      run.doc_ids.push_back(g.context.ref.doc_id);
  }
  return merge(units, std::move(run));
}

}  // namespace clinqa::generation
