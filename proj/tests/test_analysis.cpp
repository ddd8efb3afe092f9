#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <numeric>
#include <random>
#include <set>

#include "clinqa/analysis.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace clinqa;
using namespace clinqa::analysis;

namespace {

using oracle::ref_overlap;
using oracle::ref_tokens;

const std::vector<std::string>& pool() {
  static const std::vector<std::string> v{"the",   "is",     "there", "any",   "of",     "what",  "liver",
                                          "Air",   "free",   "tube",  "G-tube", "pain",  "and",   "How",
                                          "does",  "it",     "fluid", "Is",    "colon",  "were",  "stable",
                                          "which", "lesion", "no",    "mass",  "right",  "lobe",  "with"};
  return v;
}

std::string random_text(std::mt19937_64& rng, std::size_t max_words) {
  std::string s;
  const std::size_t n = rng() % max_words;
  for (std::size_t i = 0; i < n; ++i) {
    if (!s.empty()) s += (rng() % 5 == 0) ? ", " : " ";
    s += pool()[rng() % pool().size()];
  }
  if (rng() % 2) s += "?";
  return s;
}

Embedder one_hot_embedder() {
  return [](std::span<const std::string> texts) {
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      std::vector<double> v(texts.size(), 0.0);
      v[i] = 1.0;
      out.push_back(v);
    }
    return out;
  };
}

Embedder constant_embedder() {
  return [](std::span<const std::string> texts) {
    return std::vector<std::vector<double>>(texts.size(), std::vector<double>{0.3, -0.2, 0.9});
  };
}

}  // namespace

TEST_CASE("stopword list") {
  CHECK(stopwords().size() == 179);
  CHECK(is_stopword("the"));
  CHECK(is_stopword("is"));
  CHECK(is_stopword("there"));
  CHECK(is_stopword("any"));
  CHECK_FALSE(is_stopword("air"));
  CHECK_FALSE(is_stopword("evidence"));
}

TEST_CASE("tokenization") {
  CHECK(tokens("Is the G-tube patent?") == std::vector<std::string>{"is", "the", "g", "tube", "patent"});
  CHECK(content_tokens("Is there any evidence of free air?") == std::vector<std::string>{"evidence", "free", "air"});
  CHECK(tokens("  ").empty());
}

TEST_CASE("overlap classification") {
  const auto report = support::read_file(support::data_dir() / "sample_report.txt");
  CHECK(classify_overlap("Is free air present?", report));
  CHECK(classify_overlap("Where is the AIR?", report));
  CHECK_FALSE(classify_overlap("Is there any evidence of gastrointestinal perforation?", report));
  CHECK_FALSE(classify_overlap("Is there any of the?", report));
  CHECK_FALSE(classify_overlap("", report));
}

TEST_CASE("overlap matches a set intersection oracle on random cases") {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 500; ++i) {
    const auto q = random_text(rng, 8);
    const auto c = random_text(rng, 20);
    INFO(q, " | ", c);
    CHECK(classify_overlap(q, c) == ref_overlap(q, c));
  }
}

TEST_CASE("overlap is monotone in shared content tokens") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto q = random_text(rng, 6);
    const auto c = random_text(rng, 12) + " hepatomegaly";
    if (classify_overlap(q, c)) CHECK(classify_overlap(q + " hepatomegaly", c));
    CHECK(classify_overlap(q + " hepatomegaly", c));
  }
}

TEST_CASE("type codes") {
  CHECK(type_code(true, true) == TypeCode::OA);
  CHECK(type_code(true, false) == TypeCode::OU);
  CHECK(type_code(false, true) == TypeCode::NOA);
  CHECK(type_code(false, false) == TypeCode::NOU);
  CHECK(to_string(TypeCode::NOA) == "NOA");
}

TEST_CASE("labels partition any question set") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<QuestionRecord> recs;
    const std::size_t n = 1 + rng() % 97;
    for (std::size_t i = 0; i < n; ++i)
      recs.push_back({"q" + std::to_string(i), "d", random_text(rng, 6), {random_text(rng, 15)}, rng() % 2 == 0});
    const auto labels = label_questions(recs);
    REQUIRE(labels.size() == n);
    std::array<std::size_t, 4> counts{};
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[static_cast<std::size_t>(labels[i].type)];
      CHECK(labels[i].answerable == recs[i].answerable);
    }
    CHECK(std::accumulate(counts.begin(), counts.end(), std::size_t{0}) == n);
    const auto pct = type_distribution(labels);
    CHECK(std::abs(pct[0] + pct[1] + pct[2] + pct[3] - 100.0) <= 0.05);
  }
  CHECK(type_distribution({}) == std::array<double, 4>{});
  const std::vector<QuestionRecord> bad{{"q", "d", "Any air?", {}, true}};
  CHECK_THROWS_AS(label_questions(bad), DataError);
}

TEST_CASE("run records dedupe questions asked against several sections") {
  generation::GenerationRun run;
  run.contexts = {{{"d1", "FINDINGS", 0, 10}, " The liver is normal."},
                  {{"d1", "IMPRESSION", 10, 20}, " Free air."}};
  generation::QAPair a{"d1|FINDINGS|0", "Is there free air?", run.contexts[0].ref, std::nullopt, {}};
  generation::QAPair b{"d1|IMPRESSION|0", "Is there free air?", run.contexts[1].ref,
                       generation::Answer{"Free air", 1}, {}};
  run.pairs = {a, b};
  const auto recs = records_from_run(run);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].answerable);
  CHECK(recs[0].contexts.size() == 2);
  CHECK(label_questions(recs)[0].type == TypeCode::OA);
}

TEST_CASE("squad records follow is_impossible") {
  corpus::SquadDataset ds;
  ds.data.push_back({"doc1", {{" Free air.", "doc1|FINDINGS", {{"q1", "Free air?", {{"Free air", 1}}, false},
                                                               {"q2", "Any perforation?", {}, true}}}}});
  const auto recs = records_from_squad(ds);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].doc_id == "doc1");
  const auto labels = label_questions(recs);
  CHECK(labels[0].type == TypeCode::OA);
  CHECK(labels[1].type == TypeCode::NOU);
}

TEST_CASE("APS bounds and fixed cases") {
  const std::vector<QuestionGroup> same{{"d", {"Is there air?", "Is there air?"}}};
  CHECK(diversity_report(same, one_hot_embedder()).aps.value() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(*diversity_report(same, constant_embedder()).aps - 1.0) <= 1e-9);

  const std::vector<QuestionGroup> singles{{"a", {"One?"}}, {"b", {"Two?"}}};
  const auto r = diversity_report(singles, one_hot_embedder());
  CHECK_FALSE(r.aps);
  CHECK(r.aqp == 1.0);

  const auto mock = std::make_shared<llm::MockBackend>();
  const Embedder hashed = [&](std::span<const std::string> t) {
    std::vector<std::vector<double>> out;
    for (const auto& s : t) out.push_back(mock->embedding_for(s));
    return out;
  };
  const std::vector<QuestionGroup> identical{{"d", {"Is the G-tube patent?", "Is the G-tube patent?", "Is the G-tube patent?"}}};
  CHECK(std::abs(*diversity_report(identical, hashed).aps - 1.0) <= 1e-9);
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    std::vector<QuestionGroup> gs{{"d", {random_text(rng, 6) + "a", random_text(rng, 6) + "b", random_text(rng, 6)}}};
    const double aps = *diversity_report(gs, hashed).aps;
    CHECK(aps >= -1.0);
    CHECK(aps <= 1.0);
  }
  CHECK_THROWS_AS(diversity_report({}, hashed), std::invalid_argument);
}

TEST_CASE("APS macro-averages over documents") {
  // doc a: identical pair -> 1; doc b: orthogonal pair -> 0
  const Embedder by_text = [](std::span<const std::string> t) {
    std::vector<std::vector<double>> out;
    for (const auto& s : t) out.push_back(s == "X?" ? std::vector<double>{1, 0} : std::vector<double>{0, 1});
    return out;
  };
  const std::vector<QuestionGroup> gs{{"a", {"X?", "X?"}}, {"b", {"X?", "Y?"}}, {"c", {"Z?"}}};
  CHECK(*diversity_report(gs, by_text).aps == doctest::Approx(0.5));
}

TEST_CASE("AQP, length and vocab match brute-force counts") {
  const std::vector<QuestionGroup> fixed{{"d", {"Is it?", "What is it?", "Is there air?"}}};
  const auto r = diversity_report(fixed, constant_embedder());
  CHECK(r.aqp == 2.0);
  CHECK(r.avg_length == doctest::Approx(8.0 / 3.0));
  CHECK(r.vocab_size == 5);

  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<QuestionGroup> groups;
    const std::size_t ng = 1 + rng() % 6;
    for (std::size_t g = 0; g < ng; ++g) {
      QuestionGroup grp{"doc" + std::to_string(g), {}};
      const std::size_t nq = 1 + rng() % 5;
      for (std::size_t q = 0; q < nq; ++q) grp.questions.push_back(random_text(rng, 9) + " x");
      groups.push_back(grp);
    }
    std::set<std::string> vocab, vocab_content;
    double prefix_sum = 0.0;
    std::size_t total = 0, nq = 0;
    for (const auto& g : groups) {
      std::set<std::string> firsts;
      for (const auto& q : g.questions) {
        const auto toks = ref_tokens(q);
        total += toks.size();
        ++nq;
        for (const auto& t : toks) {
          vocab.insert(t);
          if (!is_stopword(t)) vocab_content.insert(t);
        }
        if (!toks.empty()) firsts.insert(toks.front());
      }
      CHECK(firsts.size() >= 1);
      CHECK(firsts.size() <= g.questions.size());
      prefix_sum += static_cast<double>(firsts.size());
    }
    const auto rep = diversity_report(groups, constant_embedder());
    CHECK(rep.vocab_size == vocab.size());
    CHECK(rep.aqp == doctest::Approx(prefix_sum / groups.size()).epsilon(1e-12));
    CHECK(rep.avg_length == doctest::Approx(static_cast<double>(total) / nq).epsilon(1e-12));
    CHECK(rep.n_questions == nq);
    CHECK(diversity_report(groups, constant_embedder(), {true}).vocab_size == vocab_content.size());
  }
}

TEST_CASE("vocabulary is subadditive") {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    QuestionGroup a{"a", {random_text(rng, 8) + " x", random_text(rng, 8) + " y"}};
    QuestionGroup b{"b", {random_text(rng, 8) + " z"}};
    const std::vector<QuestionGroup> ga{a}, gb{b}, both{a, b};
    CHECK(diversity_report(both, constant_embedder()).vocab_size <=
          diversity_report(ga, constant_embedder()).vocab_size + diversity_report(gb, constant_embedder()).vocab_size);
  }
}

TEST_CASE("analyze adds the type distribution and renders") {
  std::vector<QuestionRecord> recs;
  for (int d = 0; d < 64; ++d) {
    for (int q = 0; q < 3; ++q)
      recs.push_back({"q", "d" + std::to_string(d), q == 0 ? "Is there free air?" : "What about the colon?",
                      {" Free air is seen."}, q != 2});
  }
  const auto r = analyze(recs, constant_embedder());
  CHECK(r.n_questions == 192);
  REQUIRE(r.type_distribution);
  CHECK((*r.type_distribution)[0] == doctest::Approx(100.0 / 3));
  CHECK((*r.type_distribution)[2] == doctest::Approx(100.0 / 3));
  CHECK((*r.type_distribution)[3] == doctest::Approx(100.0 / 3));
  const auto j = nlohmann::json::parse(report_to_json(r, "synthetic"));
  CHECK(j["n_questions"] == 192);
  CHECK(j["type_distribution"]["OU"] == 0.0);
  const std::vector<std::pair<std::string, DiversityReport>> rows{{"synthetic", r}};
  const auto table = report_table(rows);
  CHECK(table.find("APS") != std::string::npos);
  CHECK(table.find("1.000") != std::string::npos);
}
