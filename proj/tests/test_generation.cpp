#include <doctest.h>

#include <json.hpp>
#include <set>

#include "clinqa/generation.hpp"
#include "clinqa/text.hpp"
#include "support.hpp"

using namespace clinqa;
using namespace clinqa::generation;

namespace {

struct MockRig {
  std::shared_ptr<llm::MockBackend> backend;
  llm::Gateway gateway;

  explicit MockRig(llm::MockOptions opts = {})
      : backend(std::make_shared<llm::MockBackend>(opts)), gateway(backend, options()) {}

  static llm::GatewayOptions options() {
    llm::GatewayOptions o;
    o.sleep = [](std::chrono::milliseconds) {};
    o.clock = [] { return std::int64_t{0}; };
    return o;
  }
  void script(std::string stage, std::string unit, std::string reply) {
    backend->add_transcript_entry(std::move(stage), std::move(unit), llm::MockReply::ok(std::move(reply)));
  }
};

corpus::Document sample_report() {
  return corpus::make_document("sample", support::read_file(support::data_dir() / "sample_report.txt"));
}

std::string findings_of(const corpus::Document& doc) {
  for (const auto& s : corpus::extract_sections(doc, corpus::radqa_section_headers())) {
    if (s.name == "FINDINGS") return std::string(doc.slice(s.char_start, s.char_end));
  }
  return {};
}

}  // namespace

TEST_CASE("alignment tiers") {
  const auto doc = sample_report();
  const std::string_view text = doc.text;
  const auto exact = align_answer("Subcutaneous air is still present", text);
  REQUIRE(exact);
  CHECK(exact->tier == 1);
  CHECK(exact->char_start == text.find("Subcutaneous air is still present"));
  CHECK(exact->length == std::string_view("Subcutaneous air is still present").size());

  const auto cased = align_answer("  subcutaneous AIR is still present ", text);
  REQUIRE(cased);
  CHECK(cased->tier == 2);
  CHECK(cased->char_start == exact->char_start);

  const auto loose = align_answer("supine film and therefore there is limited", text);
  REQUIRE(loose);
  CHECK(loose->tier == 3);
  CHECK(text.substr(loose->char_start, loose->length) == "supine film, and therefore, there is limited");

  CHECK_FALSE(align_answer("pneumothorax is present", text));
  CHECK_THROWS_AS(align_answer("", text), std::invalid_argument);

  const auto first = align_answer("is", "This is it; is it?");
  REQUIRE(first);
  CHECK(first->char_start == 2);
}

TEST_CASE("alignment keeps multibyte characters whole") {
  const std::string ctx = "Lesion at T\xc3\xa9 level, size 2 cm.";
  const auto hit = align_answer("t\xc3\xa9 level size", ctx);
  REQUIRE(hit);
  CHECK(ctx.substr(hit->char_start, hit->length) == "T\xc3\xa9 level, size");
}

TEST_CASE("summaries parse, tolerate prose and skip after two failures") {
  MockRig rig;
  const auto doc = sample_report();
  const auto schema = prompting::summary_schema(prompting::Dataset::radqa, prompting::SchemaVariant::full);
  GenerationSettings settings;
  Warnings w;

  rig.script("summarization", "sample", support::read_file(support::data_dir() / "sample_summary.json"));
  const auto rec = summarize_document("sample", doc.text, schema, rig.gateway, settings, w);
  REQUIRE(rec);
  CHECK(rec->doc_id == "sample");
  REQUIRE(rec->values.size() == 5);
  CHECK(rec->values[0].first == "symptoms");
  CHECK(rec->values[0].second == std::vector<std::string>{"abdominal pain"});

  rig.script("summarization", "wrapped",
             "Sure! Here is the summary:\n```json\n{\"symptoms\": [\"pain\"], \"medical_conditions\": [],"
             " \"areas_examined\": [], \"patient_medical_history\": [], \"diagnostic_techniques\": []}\n```\nDone.");
  const auto wrapped = summarize_document("wrapped", doc.text, schema, rig.gateway, settings, w);
  REQUIRE(wrapped);
  CHECK(wrapped->values[0].second == std::vector<std::string>{"pain"});

  rig.script("summarization", "broken", "I cannot summarize this.");
  CHECK_FALSE(summarize_document("broken", doc.text, schema, rig.gateway, settings, w));
  CHECK(w.count("skip") == 1);
  CHECK(rig.backend->calls() == 4);
}

TEST_CASE("question generation parses lists and handles count mismatches") {
  MockRig rig;
  GenerationSettings settings;
  Warnings w;
  rig.script("question_gen", "t7", "1. Is there any evidence of gastrointestinal perforation?");
  const auto one = generate_questions("report", prompting::Strategy::no_overlap, 1, rig.gateway, settings, "t7", 0.0, w);
  CHECK(one == std::vector<std::string>{"Is there any evidence of gastrointestinal perforation?"});

  std::string seven;
  for (int i = 1; i <= 7; ++i) seven += std::to_string(i) + ". Question number " + std::to_string(i) + "?\n";
  rig.script("question_gen", "many", seven);
  const auto five =
      generate_questions("report", prompting::Strategy::direct_instruction, 5, rig.gateway, settings, "many", 0.0, w);
  CHECK(five.size() == 5);
  CHECK(five[4] == "Question number 5?");
  CHECK(w.count("count") == 1);
  CHECK(rig.backend->calls() == 3);

  rig.script("question_gen", "prose", "I would rather not.");
  CHECK_THROWS_AS(
      generate_questions("report", prompting::Strategy::direct_instruction, 5, rig.gateway, settings, "prose", 0.0, w),
      ParseError);
  CHECK_THROWS_AS(
      generate_questions("report", prompting::Strategy::direct_instruction, 0, rig.gateway, settings, "x", 0.0, w),
      std::invalid_argument);
}

TEST_CASE("distillation maps answers positionally") {
  MockRig rig;
  GenerationSettings settings;
  Warnings w;
  const std::vector<std::string> qs{
      "What is the current position of the G-tube, and has it changed since the last examination?",
      "Is there any evidence of gastrointestinal perforation?"};
  rig.script("answer_distill", "sample/FINDINGS",
             "Q: What is the current position of the G-tube, and has it changed since the last examination?\n"
             "A: \"The G-tube placement is unchanged compared to the prior study\"\n\n"
             "Q: Is there any evidence of gastrointestinal perforation?\nA: Unanswerable\n");
  const auto items = distill_answers(qs, findings_of(sample_report()), rig.gateway, settings, "sample/FINDINGS", w);
  REQUIRE(items.size() == 2);
  CHECK(items[0].answer == "The G-tube placement is unchanged compared to the prior study");
  CHECK_FALSE(items[1].answer);
  CHECK(w.size() == 0);

  rig.script("answer_distill", "short", "Q: only one?\nA: \"Subcutaneous air is still present\"\n");
  const auto partial = distill_answers(qs, "ctx", rig.gateway, settings, "short", w);
  REQUIRE(partial.size() == 2);
  CHECK(partial[0].question == qs[0]);
  CHECK(partial[0].answer == "Subcutaneous air is still present");
  CHECK_FALSE(partial[1].answer);
  CHECK(w.count("distill") >= 1);

  CHECK_THROWS_AS(distill_answers({}, "ctx", rig.gateway, settings, "x", w), std::invalid_argument);
}

TEST_CASE("radqa pipeline produces q pairs per present section") {
  MockRig rig;
  const auto docs = support::radiology_corpus(64);
  GenerationSettings settings;
  settings.parallelism = 4;
  const auto run = run_radqa_pipeline(docs, prompting::Strategy::direct_instruction, 5, rig.gateway, settings);
  CHECK(run.pairs.size() == 640);
  CHECK(run.contexts.size() == 128);
  CHECK(run.doc_ids.size() == 64);
  std::set<std::string> ids;
  for (const auto& p : run.pairs) {
    ids.insert(p.id);
    const auto* ctx = run.find_context(p.context);
    REQUIRE(ctx);
    if (p.answer) CHECK(ctx->text.substr(p.answer->char_start, p.answer->text.size()) == p.answer->text);
    CHECK(p.provenance.prompt_ids.size() == 2);
  }
  CHECK(ids.size() == 640);
  CHECK(run.pairs[0].id == "rad0000|FINDINGS|0");

  const std::vector<corpus::Document> findings_only{support::radiology_report(3, true, false)};
  const auto one = run_radqa_pipeline(findings_only, prompting::Strategy::direct_instruction, 5, rig.gateway, settings);
  CHECK(one.pairs.size() == 5);

  const std::vector<corpus::Document> neither{support::radiology_report(4, false, false)};
  const auto none = run_radqa_pipeline(neither, prompting::Strategy::direct_instruction, 5, rig.gateway, settings);
  CHECK(none.pairs.empty());
  CHECK(std::count_if(none.warnings.begin(), none.warnings.end(),
                      [](const std::string& w) { return w.starts_with("skip"); }) == 1);
}

TEST_CASE("context intervals are code points into the source document") {
  MockRig rig;
  auto doc = corpus::make_document("u1", "HISTORY: caf\xc3\xa9 visit.\nFINDINGS: The liver is normal in size.\n");
  const std::vector<corpus::Document> docs{doc};
  const auto run = run_radqa_pipeline(docs, prompting::Strategy::direct_instruction, 2, rig.gateway, {});
  REQUIRE(run.contexts.size() == 1);
  const auto& ref = run.contexts[0].ref;
  const std::string prefix = "HISTORY: caf\xc3\xa9 visit.\nFINDINGS:";
  CHECK(ref.char_start == text::utf8_length(prefix));
  CHECK(run.contexts[0].text == " The liver is normal in size.\n");
}

TEST_CASE("temperature annealing is applied per document") {
  MockRig rig;
  const auto docs = support::radiology_corpus(5);
  const auto run = run_radqa_pipeline(docs, prompting::Strategy::temp_anneal, 2, rig.gateway, {});
  std::vector<double> seen;
  for (const auto& e : rig.gateway.ledger().entries()) {
    if (e.request_tag.starts_with("question_gen/")) seen.push_back(e.temperature);
    else CHECK(e.temperature == 0.0);
  }
  CHECK(seen == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(run.pairs.back().provenance.temperatures[0] == 1.0);
}

TEST_CASE("backend failures skip a document, auth failures abort") {
  MockRig rig;
  const auto docs = support::radiology_corpus(3);
  rig.backend->add_transcript_entry("question_gen", "rad0001", llm::MockReply::fail(llm::FailureKind::content_filter));
  const auto run = run_radqa_pipeline(docs, prompting::Strategy::direct_instruction, 5, rig.gateway, {});
  CHECK(run.pairs.size() == 20);
  CHECK(run.warnings.size() == 1);
  CHECK(run.warnings[0].find("rad0001") != std::string::npos);

  MockRig denied;
  denied.backend->add_transcript_entry("question_gen", "rad0002", llm::MockReply::fail(llm::FailureKind::auth));
  CHECK_THROWS_AS(run_radqa_pipeline(docs, prompting::Strategy::direct_instruction, 5, denied.gateway, {}),
                  llm::BackendError);
}

TEST_CASE("mimic filtering loop keeps only answerable pairs") {
  const auto doc = support::clinical_note("n1", 300, 5);
  const std::vector<corpus::Document> docs{doc};
  const auto segments = corpus::segment_document(doc);
  REQUIRE(segments.size() == 1);
  GenerationSettings settings;
  settings.dataset = prompting::Dataset::mimicqa;

  llm::MockOptions three;
  three.answerable_per_call = 3;
  MockRig rig(three);
  const auto run = run_mimic_pipeline(docs, segments, prompting::Strategy::direct_instruction, 5, rig.gateway, settings);
  CHECK(run.pairs.size() == 5);
  for (const auto& p : run.pairs) CHECK(p.answer);
  std::size_t distill_calls = 0;
  for (const auto& e : rig.gateway.ledger().entries()) distill_calls += e.request_tag.starts_with("answer_distill/");
  CHECK(distill_calls == 2);

  llm::MockOptions zero;
  zero.answerable_per_call = 0;
  MockRig dry(zero);
  const auto empty = run_mimic_pipeline(docs, segments, prompting::Strategy::direct_instruction, 5, dry.gateway, settings);
  CHECK(empty.pairs.empty());
  CHECK(empty.contexts.size() == 1);
  std::size_t shortfalls = 0;
  for (const auto& w : empty.warnings) shortfalls += w.starts_with("shortfall");
  CHECK(shortfalls == 1);
  CHECK(dry.gateway.ledger().size() == 6);
}

TEST_CASE("mimic segments become separate contexts") {
  const auto doc = support::clinical_note("n2", 1200, 9);
  const std::vector<corpus::Document> docs{doc};
  const auto segments = corpus::segment_document(doc);
  REQUIRE(segments.size() == 3);
  GenerationSettings settings;
  settings.dataset = prompting::Dataset::mimicqa;
  MockRig rig;
  const auto run = run_mimic_pipeline(docs, segments, prompting::Strategy::direct_instruction, 5, rig.gateway, settings);
  CHECK(run.pairs.size() == 15);
  CHECK(run.contexts[2].ref.section == "segment-2");
  CHECK(run.contexts[2].ref.char_end == text::utf8_length(doc.text));
}

TEST_CASE("gold questions are answered with their own ids") {
  corpus::SquadDataset ds;
  for (int a = 0; a < 3; ++a) {
    corpus::SquadArticle art;
    art.title = "doc" + std::to_string(a);
    corpus::SquadParagraph para;
    para.context = " The liver is normal. There is trace free fluid in the pelvis.";
    para.context_id = art.title + "|FINDINGS";
    for (int q = 0; q < 4; ++q) para.qas.push_back({art.title + "-q" + std::to_string(q), "Question " + std::to_string(q) + "?", {}, true});
    art.paragraphs.push_back(para);
    ds.data.push_back(art);
  }
  const auto groups = gold_groups_from_squad(ds);
  REQUIRE(groups.size() == 3);
  CHECK(groups[1].context.ref.doc_id == "doc1");
  CHECK(groups[1].context.ref.section == "FINDINGS");
  MockRig rig;
  const auto run = answer_gold_questions(groups, rig.gateway, {});
  CHECK(run.pairs.size() == 12);
  CHECK(run.pairs[5].id == "doc1-q1");
  CHECK(run.strategy == prompting::Strategy::gold_question);

  const std::vector<std::string> pick{"doc2"};
  CHECK(gold_groups_from_squad(ds, pick).size() == 1);
  const std::vector<std::string> missing{"nope"};
  CHECK_THROWS_AS(gold_groups_from_squad(ds, missing), DataError);
  CHECK(answer_gold_questions({}, rig.gateway, {}).pairs.empty());
}

TEST_CASE("scale plan builds nested manifests") {
  std::vector<corpus::Document> docs;
  for (int i = 0; i < 803; ++i) docs.push_back(corpus::make_document("d" + std::to_string(i), "FINDINGS: x."));
  const auto plan = build_scale_plan({}, docs, "runs");
  REQUIRE(plan.size() == 21);
  CHECK(plan[0].name == "docs8_pairs5");
  CHECK(plan[0].samples.size() == 3);
  CHECK(plan[0].output_dirs[2] == std::filesystem::path("runs/docs8_pairs5/seed-3"));
  CHECK(plan.back().doc_count == 803);
  for (std::size_t seed = 0; seed < 3; ++seed) {
    const auto& small = plan[0].samples[seed].doc_ids;
    const auto& big = plan[3].samples[seed].doc_ids;
    CHECK(std::equal(small.begin(), small.end(), big.begin()));
  }
  const auto j = nlohmann::json::parse(manifest_to_json(plan[4]));
  CHECK(j["doc_count"] == 16);

  const std::vector<corpus::Document> few(docs.begin(), docs.begin() + 100);
  try {
    build_scale_plan({}, few, "runs");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("128") != std::string::npos);
  }
  ScalePlan bad;
  bad.pairs_per_doc = {0};
  CHECK_THROWS_AS(build_scale_plan(bad, docs, "runs"), ConfigError);
}

TEST_CASE("run directories round trip and export to squad") {
  MockRig rig;
  const auto docs = support::radiology_corpus(6);
  GenerationSettings settings;
  const auto run = run_radqa_pipeline(docs, prompting::Strategy::direct_instruction, 3, rig.gateway, settings);
  support::TempDir tmp;
  write_run(tmp / "r", run, rig.gateway.ledger(), "{}");
  for (auto f : {"manifest.json", "pairs.jsonl", "contexts.jsonl", "summaries.jsonl", "ledger.jsonl", "warnings.log"})
    CHECK(std::filesystem::exists(tmp / "r" / f));
  const auto back = read_run(tmp / "r");
  REQUIRE(back.pairs.size() == run.pairs.size());
  for (std::size_t i = 0; i < run.pairs.size(); ++i) {
    CHECK(back.pairs[i].id == run.pairs[i].id);
    CHECK(back.pairs[i].context == run.pairs[i].context);
    CHECK(back.pairs[i].answer.has_value() == run.pairs[i].answer.has_value());
    if (run.pairs[i].answer) CHECK(back.pairs[i].answer->char_start == run.pairs[i].answer->char_start);
  }

  const auto squad = to_squad(back);
  CHECK(squad.question_count() == run.pairs.size());
  CHECK(squad.data.size() == 6);
  for (const auto& art : squad.data) {
    for (const auto& para : art.paragraphs) {
      for (const auto& q : para.qas) {
        for (const auto& a : q.answers) {
          const auto b = *text::char_to_byte(para.context, a.answer_start);
          CHECK(para.context.substr(b, a.text.size()) == a.text);
        }
      }
    }
  }
  CHECK(corpus::dump_squad(to_squad(read_run(tmp / "r"))) == corpus::dump_squad(squad));

  auto broken = run;
  for (auto& p : broken.pairs) {
    if (p.answer) {
      p.answer->char_start += 1;
      break;
    }
  }
  CHECK_THROWS_AS(to_squad(broken), DataError);
  CHECK_THROWS_AS(read_run(tmp / "missing"), DataError);
}

TEST_CASE("pairs files are identical across repeated runs and parallelism") {
  const auto docs = support::radiology_corpus(12);
  std::string first;
  for (std::size_t par : {1, 4, 1}) {
    MockRig rig;
    GenerationSettings settings;
    settings.parallelism = par;
    settings.seed = 7;
    const auto run = run_radqa_pipeline(docs, prompting::Strategy::temp_anneal, 4, rig.gateway, settings);
    support::TempDir tmp;
    write_run(tmp / "r", run, rig.gateway.ledger(), "{}");
    const auto body = support::read_file(tmp / "r" / "pairs.jsonl") + support::read_file(tmp / "r" / "ledger.jsonl");
    if (first.empty()) first = body;
    CHECK(body == first);
  }
}
