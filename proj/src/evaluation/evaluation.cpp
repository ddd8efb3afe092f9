#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "clinqa/evaluation.hpp"
#include "clinqa/generation.hpp"
#include "clinqa/text.hpp"

namespace clinqa::evaluation {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool is_word_byte(unsigned char c) {
  return c >= 0x80 || c == '_' || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

bool is_article(std::string_view w) { return w == "a" || w == "an" || w == "the"; }

void check_qids(const Prediction& pred, const GoldEntry& gold) {
  if (pred.qid != gold.qid) throw DataError("prediction " + pred.qid + " scored against gold " + gold.qid);
}

std::string fmt(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

struct Sums {
  double em = 0.0, f1 = 0.0, ro = 0.0;
  std::size_t n = 0;

  void add(int e, double f, int r) {
    em += e;
    f1 += f;
    ro += r;
    ++n;
  }

  Metrics metrics() const {
    if (n == 0) return {};
    const double d = static_cast<double>(n);
    return {100.0 * em / d, 100.0 * f1 / d, 100.0 * ro / d, n};
  }
};

ordered_json metrics_json(const Metrics& m) {
  ordered_json j;
  j["n"] = m.n;
  j["em"] = m.em;
  j["f1"] = m.f1;
  j["ro"] = m.ro;
  return j;
}

ordered_json agg_json(const SeedAggregate& a) {
  ordered_json j;
  j["mean"] = a.mean;
  j["std"] = a.std;
  j["k"] = a.k;
  return j;
}

ordered_json aggregates_json(const MetricAggregates& m) {
  ordered_json j;
  j["n"] = m.n;
  j["em"] = agg_json(m.em);
  j["f1"] = agg_json(m.f1);
  j["ro"] = agg_json(m.ro);
  return j;
}

std::string render_table(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    if (width.size() < row.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], text::utf8_length(row[c]));
  }
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::string pad(width[c] - text::utf8_length(row[c]), ' ');
      line += c == 0 ? row[c] + pad : "  " + pad + row[c];
    }
    out += line + "\n";
  }
  return out;
}

analysis::TypeCode parse_type(std::string_view s) {
  for (auto t : analysis::kTypeCodes) {
    if (analysis::to_string(t) == s) return t;
  }
  throw DataError("unknown question type '" + std::string(s) + "'");
}

}  // namespace

std::string normalize_answer(std::string_view s) {
  std::string buf;
  buf.reserve(s.size());
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (text::is_punct(c)) continue;
    buf.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c | 0x20) : ch);
  }
  // articles go only when they form a whole word
  std::string no_articles;
  no_articles.reserve(buf.size());
  for (std::size_t i = 0; i < buf.size();) {
    if (!is_word_byte(static_cast<unsigned char>(buf[i]))) {
      no_articles.push_back(buf[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < buf.size() && is_word_byte(static_cast<unsigned char>(buf[j]))) ++j;
    const std::string_view word(buf.data() + i, j - i);
    if (is_article(word)) {
      no_articles.push_back(' ');
    } else {
      no_articles.append(word);
    }
    i = j;
  }
  std::string out;
  for (auto w : text::split_ws(no_articles)) {
    if (!out.empty()) out.push_back(' ');
    out.append(w);
  }
  return out;
}

int exact_match(const Prediction& pred, const GoldEntry& gold) {
  check_qids(pred, gold);
  if (gold.unanswerable() || !pred.text) return gold.unanswerable() && !pred.text ? 1 : 0;
  const std::string p = normalize_answer(*pred.text);
  for (const auto& a : gold.answers) {
    if (normalize_answer(a.text) == p) return 1;
  }
  return 0;
}

double token_f1(const Prediction& pred, const GoldEntry& gold) {
  check_qids(pred, gold);
  if (gold.unanswerable() || !pred.text) return gold.unanswerable() && !pred.text ? 1.0 : 0.0;
  const std::string p_norm = normalize_answer(*pred.text);
  auto p_toks = text::split_ws(p_norm);
  std::sort(p_toks.begin(), p_toks.end());
  double best = 0.0;
  for (const auto& a : gold.answers) {
    const std::string g_norm = normalize_answer(a.text);
    auto g_toks = text::split_ws(g_norm);
    if (p_toks.empty() || g_toks.empty()) {
      best = std::max(best, p_toks.empty() && g_toks.empty() ? 1.0 : 0.0);
      continue;
    }
    std::sort(g_toks.begin(), g_toks.end());
    std::vector<std::string_view> common;
    std::set_intersection(p_toks.begin(), p_toks.end(), g_toks.begin(), g_toks.end(), std::back_inserter(common));
    if (common.empty()) continue;
    const double precision = static_cast<double>(common.size()) / static_cast<double>(p_toks.size());
    const double recall = static_cast<double>(common.size()) / static_cast<double>(g_toks.size());
    best = std::max(best, 2.0 * precision * recall / (precision + recall));
  }
  return best;
}

int reference_overlap(const Prediction& pred, const GoldEntry& gold, Warnings* warnings) {
  check_qids(pred, gold);
  if (gold.unanswerable() || !pred.text) return gold.unanswerable() && !pred.text ? 1 : 0;
  Span span;
  if (pred.span) {
    span = *pred.span;
  } else {
    const auto hit = pred.text->empty() ? std::nullopt : generation::align_answer(*pred.text, gold.context);
    if (!hit) {
      warn(warnings, "alignment", pred.qid + ": predicted text not found in context, scored 0");
      return 0;
    }
    span = {hit->char_start, hit->char_start + hit->length};
  }
  for (const auto& a : gold.answers) {
    const std::size_t g_end = a.char_start + a.text.size();
    if (span.start < g_end && a.char_start < span.end) return 1;
  }
  return 0;
}

EvalReport evaluate(std::span<const Prediction> preds, std::span<const GoldEntry> golds, const LabelMap* labels,
                    Warnings* warnings) {
  std::map<std::string_view, const Prediction*> by_qid;
  for (const auto& p : preds) {
    if (!by_qid.emplace(p.qid, &p).second) throw DataError("duplicate prediction for " + p.qid);
  }
  Sums all;
  std::array<Sums, 4> typed;
  std::size_t matched = 0;
  for (const auto& g : golds) {
    const auto it = by_qid.find(g.qid);
    if (it == by_qid.end()) throw DataError("no prediction for " + g.qid);
    ++matched;
    const Prediction& p = *it->second;
    const int em = exact_match(p, g);
    const double f1 = token_f1(p, g);
    const int ro = reference_overlap(p, g, warnings);
    all.add(em, f1, ro);
    if (labels != nullptr) {
      const auto lit = labels->find(g.qid);
      if (lit == labels->end()) throw DataError("no question type label for " + g.qid);
      typed[static_cast<std::size_t>(lit->second.type)].add(em, f1, ro);
    }
  }
  if (matched < by_qid.size()) {
    warn(warnings, "predictions",
         std::to_string(by_qid.size() - matched) + " prediction(s) for qids not in the gold file ignored");
  }
  EvalReport report;
  report.overall = all.metrics();
  if (labels != nullptr) {
    std::array<Metrics, 4> per{};
    for (std::size_t i = 0; i < 4; ++i) per[i] = typed[i].metrics();
    report.per_type = per;
  }
  return report;
}

SeedAggregate aggregate(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("aggregate: no values");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double k = static_cast<double>(values.size());
  const double mean = sum / k;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / k), values.size()};
}

namespace {

MetricAggregates aggregate_metrics(const std::vector<Metrics>& ms) {
  std::vector<double> em, f1, ro;
  for (const auto& m : ms) {
    em.push_back(m.em);
    f1.push_back(m.f1);
    ro.push_back(m.ro);
  }
  return {aggregate(em), aggregate(f1), aggregate(ro), ms.front().n};
}

}  // namespace

SeedSummary aggregate_seeds(std::span<const EvalReport> reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_seeds: no reports");
  const auto& first = reports.front();
  for (const auto& r : reports) {
    if (r.overall.n != first.overall.n) throw DataError("seed reports cover different numbers of questions");
    if (r.per_type.has_value() != first.per_type.has_value())
      throw DataError("seed reports disagree on the question type breakdown");
    if (r.per_type) {
      for (std::size_t i = 0; i < 4; ++i) {
        if ((*r.per_type)[i].n != (*first.per_type)[i].n)
          throw DataError("seed reports have different question type partitions");
      }
    }
  }
  SeedSummary s;
  std::vector<Metrics> overall;
  for (const auto& r : reports) overall.push_back(r.overall);
  s.overall = aggregate_metrics(overall);
  if (first.per_type) {
    std::array<MetricAggregates, 4> per{};
    for (std::size_t i = 0; i < 4; ++i) {
      std::vector<Metrics> ms;
      for (const auto& r : reports) ms.push_back((*r.per_type)[i]);
      per[i] = aggregate_metrics(ms);
    }
    s.per_type = per;
  }
  return s;
}

std::vector<GoldEntry> gold_entries_from_squad(const corpus::SquadDataset& dataset) {
  const auto pids = corpus::squad_paragraph_ids(dataset);
  std::vector<GoldEntry> out;
  std::map<std::string, bool, std::less<>> seen;
  std::size_t k = 0;
  for (const auto& article : dataset.data) {
    for (const auto& para : article.paragraphs) {
      const std::string& pid = pids[k++];
      for (const auto& q : para.qas) {
        if (!seen.emplace(q.id, true).second) throw DataError("duplicate question id " + q.id);
        GoldEntry g{q.id, q.question, pid, para.context, {}};
        if (!q.is_impossible) {
          if (q.answers.empty()) throw DataError("answerable question " + q.id + " has no answers");
          for (const auto& a : q.answers) {
            const auto b = text::char_to_byte(para.context, a.answer_start);
            if (!b || para.context.compare(*b, a.text.size(), a.text) != 0)
              throw DataError("answer of " + q.id + " does not match its context at " + std::to_string(a.answer_start));
            g.answers.push_back({a.text, *b});
          }
        }
        out.push_back(std::move(g));
      }
    }
  }
  return out;
}

std::vector<Prediction> parse_predictions(std::string_view json_text, std::span<const GoldEntry> golds,
                                          Warnings* warnings) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("predictions file is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw DataError("predictions file must be a JSON object keyed by qid");
  std::map<std::string_view, const GoldEntry*> gold_of;
  for (const auto& g : golds) gold_of.emplace(g.qid, &g);

  std::vector<Prediction> out;
  for (const auto& [qid, v] : root.items()) {
    Prediction p{qid, std::nullopt, std::nullopt};
    std::optional<std::size_t> char_start;
    if (v.is_string()) {
      if (!v.get<std::string>().empty()) p.text = v.get<std::string>();
    } else if (v.is_object()) {
      try {
        const bool unanswerable = v.value("unanswerable", false);
        const std::string t = v.contains("text") && !v.at("text").is_null() ? v.at("text").get<std::string>() : "";
        if (v.contains("char_start") && !v.at("char_start").is_null())
          char_start = v.at("char_start").get<std::size_t>();
        if (!unanswerable) {
          if (t.empty()) {
            warn(warnings, "predictions", qid + ": empty answer treated as unanswerable");
          } else {
            p.text = t;
          }
        }
      } catch (const json::exception& e) {
        throw DataError("prediction " + qid + ": " + e.what());
      }
    } else {
      throw DataError("prediction " + qid + " must be an object or a string");
    }

    if (p.text && char_start) {
      const auto it = gold_of.find(qid);
      if (it != gold_of.end()) {
        const std::string& ctx = it->second->context;
        const auto b = text::char_to_byte(ctx, *char_start);
        if (b && ctx.compare(*b, p.text->size(), *p.text) == 0) {
          p.span = Span{*b, *b + p.text->size()};
        } else {
          warn(warnings, "predictions", qid + ": char_start does not match the text, span ignored");
        }
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path, std::span<const GoldEntry> golds,
                                         Warnings* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read predictions file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_predictions(ss.str(), golds, warnings);
}

std::string dump_predictions(std::span<const Prediction> preds, std::span<const GoldEntry> golds) {
  std::map<std::string_view, const GoldEntry*> gold_of;
  for (const auto& g : golds) gold_of.emplace(g.qid, &g);
  ordered_json root = ordered_json::object();
  for (const auto& p : preds) {
    ordered_json v;
    v["text"] = p.text.value_or("");
    const auto it = gold_of.find(p.qid);
    if (p.span && it != gold_of.end()) {
      v["char_start"] = text::byte_to_char(it->second->context, p.span->start);
    } else {
      v["char_start"] = nullptr;
    }
    v["unanswerable"] = !p.text.has_value();
    root[p.qid] = std::move(v);
  }
  return root.dump(2) + "\n";
}

LabelMap parse_labels(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("labels file is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw DataError("labels file must be a JSON object keyed by qid");
  LabelMap out;
  for (const auto& [qid, v] : root.items()) {
    std::string code;
    if (v.is_string()) {
      code = v.get<std::string>();
    } else if (v.is_object() && v.contains("type") && v.at("type").is_string()) {
      code = v.at("type").get<std::string>();
    } else {
      throw DataError("label for " + qid + " must be a type code");
    }
    const auto t = parse_type(code);
    const bool overlap = t == analysis::TypeCode::OA || t == analysis::TypeCode::OU;
    const bool answerable = t == analysis::TypeCode::OA || t == analysis::TypeCode::NOA;
    out.emplace(qid, analysis::QuestionLabel{overlap, answerable, t});
  }
  return out;
}

LabelMap labels_from_gold(const corpus::SquadDataset& dataset) {
  const auto records = analysis::records_from_squad(dataset);
  const auto labels = analysis::label_questions(records);
  LabelMap out;
  for (std::size_t i = 0; i < records.size(); ++i) out.emplace(records[i].id, labels[i]);
  return out;
}

std::string dump_labels(const LabelMap& labels) {
  ordered_json root = ordered_json::object();
  for (const auto& [qid, l] : labels) {
    ordered_json v;
    v["type"] = analysis::to_string(l.type);
    v["overlap"] = l.overlap;
    v["answerable"] = l.answerable;
    root[qid] = std::move(v);
  }
  return root.dump(2) + "\n";
}

std::string report_to_json(const EvalReport& report) {
  ordered_json j = metrics_json(report.overall);
  if (report.per_type) {
    ordered_json per;
    for (std::size_t i = 0; i < 4; ++i) {
      per[std::string(analysis::to_string(analysis::kTypeCodes[i]))] = metrics_json((*report.per_type)[i]);
    }
    j["per_type"] = per;
  }
  return j.dump(2) + "\n";
}

std::string summary_to_json(const SeedSummary& summary) {
  ordered_json j = aggregates_json(summary.overall);
  if (summary.per_type) {
    ordered_json per;
    for (std::size_t i = 0; i < 4; ++i) {
      per[std::string(analysis::to_string(analysis::kTypeCodes[i]))] = aggregates_json((*summary.per_type)[i]);
    }
    j["per_type"] = per;
  }
  return j.dump(2) + "\n";
}

std::string report_table(std::span<const std::pair<std::string, EvalReport>> rows) {
  const bool typed = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.second.per_type.has_value(); });
  std::vector<std::vector<std::string>> cells{{"name", "n", "EM", "F1", "RO"}};
  if (typed) {
    for (auto t : analysis::kTypeCodes) cells[0].push_back("RO " + std::string(analysis::to_string(t)));
  }
  for (const auto& [name, r] : rows) {
    std::vector<std::string> row{name, std::to_string(r.overall.n), fmt(r.overall.em), fmt(r.overall.f1),
                                 fmt(r.overall.ro)};
    if (typed) {
      for (std::size_t i = 0; i < 4; ++i) {
        if (!r.per_type || (*r.per_type)[i].n == 0) {
          row.emplace_back("-");
        } else {
          row.push_back(fmt((*r.per_type)[i].ro));
        }
      }
    }
    cells.push_back(std::move(row));
  }
  return render_table(cells);
}

std::string summary_table(const SeedSummary& summary) {
  auto cell = [](const SeedAggregate& a) { return fmt(a.mean, 1) + " \u00b1" + fmt(a.std, 1); };
  std::vector<std::vector<std::string>> cells{{"subset", "n", "seeds", "EM", "F1", "RO"}};
  auto add = [&](const std::string& name, const MetricAggregates& m) {
    if (m.n == 0) {
      cells.push_back({name, "0", std::to_string(m.em.k), "-", "-", "-"});
      return;
    }
    cells.push_back({name, std::to_string(m.n), std::to_string(m.em.k), cell(m.em), cell(m.f1), cell(m.ro)});
  };
  add("all", summary.overall);
  if (summary.per_type) {
    for (std::size_t i = 0; i < 4; ++i) add(std::string(analysis::to_string(analysis::kTypeCodes[i])), (*summary.per_type)[i]);
  }
  return render_table(cells);
}

}  // namespace clinqa::evaluation
