#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "clinqa/analysis.hpp"
#include "clinqa/text.hpp"

namespace clinqa::analysis {

namespace {

constexpr std::string_view kStopwords[] = {
    "i", "me", "my", "myself", "we", "our", "ours", "ourselves", "you", "you're", "you've",
    "you'll", "you'd", "your", "yours", "yourself", "yourselves", "he", "him", "his", "himself",
    "she", "she's", "her", "hers", "herself", "it", "it's", "its", "itself", "they", "them",
    "their", "theirs", "themselves", "what", "which", "who", "whom", "this", "that", "that'll",
    "these", "those", "am", "is", "are", "was", "were", "be", "been", "being", "have", "has", "had",
    "having", "do", "does", "did", "doing", "a", "an", "the", "and", "but", "if", "or", "because",
    "as", "until", "while", "of", "at", "by", "for", "with", "about", "against", "between", "into",
    "through", "during", "before", "after", "above", "below", "to", "from", "up", "down", "in",
    "out", "on", "off", "over", "under", "again", "further", "then", "once", "here", "there",
    "when", "where", "why", "how", "all", "any", "both", "each", "few", "more", "most", "other",
    "some", "such", "no", "nor", "not", "only", "own", "same", "so", "than", "too", "very", "s",
    "t", "can", "will", "just", "don", "don't", "should", "should've", "now", "d", "ll", "m", "o",
    "re", "ve", "y", "ain", "aren", "aren't", "couldn", "couldn't", "didn", "didn't", "doesn",
    "doesn't", "hadn", "hadn't", "hasn", "hasn't", "haven", "haven't", "isn", "isn't", "ma",
    "mightn", "mightn't", "mustn", "mustn't", "needn", "needn't", "shan", "shan't", "shouldn",
    "shouldn't", "wasn", "wasn't", "weren", "weren't", "won", "won't", "wouldn", "wouldn't",
};

const std::set<std::string_view, std::less<>>& stopword_set() {
  static const std::set<std::string_view, std::less<>> s(std::begin(kStopwords), std::end(kStopwords));
  return s;
}


std::string fmt(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::span<const std::string_view> stopwords() { return kStopwords; }

bool is_stopword(std::string_view token) { return stopword_set().contains(token); }

std::vector<std::string> tokens(std::string_view s) {
  std::string buf = text::to_lower(s);
  for (auto& c : buf) {
    if (text::is_punct(static_cast<unsigned char>(c))) c = ' ';
  }
  std::vector<std::string> out;
  for (auto w : text::split_ws(buf)) out.emplace_back(w);
  return out;
}

std::vector<std::string> content_tokens(std::string_view s) {
  auto toks = tokens(s);
  std::erase_if(toks, [](const std::string& t) { return is_stopword(t); });
  return toks;
}

bool classify_overlap(std::string_view question, std::string_view context) {
  const auto q = content_tokens(question);
  if (q.empty()) return false;
  const auto c = content_tokens(context);
  const std::set<std::string_view> ctx(c.begin(), c.end());
  return std::any_of(q.begin(), q.end(), [&](const std::string& t) { return ctx.contains(t); });
}

std::string_view to_string(TypeCode t) {
  switch (t) {
    case TypeCode::OA: return "OA";
    case TypeCode::OU: return "OU";
    case TypeCode::NOA: return "NOA";
    case TypeCode::NOU: return "NOU";
  }
  return "?";
}

TypeCode type_code(bool overlap, bool answerable) {
  if (overlap) return answerable ? TypeCode::OA : TypeCode::OU;
  return answerable ? TypeCode::NOA : TypeCode::NOU;
}

std::vector<QuestionRecord> records_from_run(const generation::GenerationRun& run) {
  std::vector<QuestionRecord> out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& p : run.pairs) {
    const auto* ctx = run.find_context(p.context);
    if (ctx == nullptr) throw DataError("pair " + p.id + " has no context");
    auto [it, inserted] = index.emplace(std::pair(p.context.doc_id, p.question), out.size());
    if (inserted) out.push_back({p.id, p.context.doc_id, p.question, {}, false});
    auto& rec = out[it->second];
    rec.contexts.push_back(ctx->text);
    rec.answerable = rec.answerable || p.answer.has_value();
  }
  return out;
}

std::vector<QuestionRecord> records_from_squad(const corpus::SquadDataset& dataset) {
  const auto pids = corpus::squad_paragraph_ids(dataset);
  std::vector<QuestionRecord> out;
  std::size_t k = 0;
  for (const auto& article : dataset.data) {
    for (const auto& para : article.paragraphs) {
      const std::string& pid = pids[k++];
      const auto bar = pid.find('|');
      const std::string doc = bar != std::string::npos ? pid.substr(0, bar) : article.title.empty() ? pid : article.title;
      for (const auto& q : para.qas) out.push_back({q.id, doc, q.question, {para.context}, !q.is_impossible});
    }
  }
  return out;
}

std::vector<QuestionLabel> label_questions(std::span<const QuestionRecord> records) {
  std::vector<QuestionLabel> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.contexts.empty()) throw DataError("question " + r.id + " has no context");
    bool overlap = false;
    for (const auto& c : r.contexts) overlap = overlap || classify_overlap(r.question, c);
    out.push_back({overlap, r.answerable, type_code(overlap, r.answerable)});
  }
  return out;
}

std::array<double, 4> type_distribution(std::span<const QuestionLabel> labels) {
  std::array<double, 4> pct{};
  if (labels.empty()) return pct;
  std::array<std::size_t, 4> counts{};
  for (const auto& l : labels) ++counts[static_cast<std::size_t>(l.type)];
  for (std::size_t i = 0; i < 4; ++i) pct[i] = 100.0 * static_cast<double>(counts[i]) / labels.size();
  return pct;
}

std::vector<QuestionGroup> group_by_doc(std::span<const QuestionRecord> records) {
  std::vector<QuestionGroup> out;
  std::map<std::string, std::size_t, std::less<>> index;
  for (const auto& r : records) {
    auto [it, inserted] = index.emplace(r.doc_id, out.size());
    if (inserted) out.push_back({r.doc_id, {}});
    out[it->second].questions.push_back(r.question);
  }
  return out;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

DiversityReport diversity_report(std::span<const QuestionGroup> groups, const Embedder& embedder,
                                 DiversityOptions options) {
  if (groups.empty()) throw std::invalid_argument("diversity_report: no question groups");
  DiversityReport r;
  std::size_t total_tokens = 0;
  std::set<std::string> vocab;
  double aqp_sum = 0.0;
  std::vector<std::string> to_embed;
  for (const auto& g : groups) {
    std::set<std::string> prefixes;
    for (const auto& q : g.questions) {
      const auto toks = tokens(q);
      total_tokens += toks.size();
      for (const auto& t : toks) {
        if (!options.vocab_drops_stopwords || !is_stopword(t)) vocab.insert(t);
      }
      if (!toks.empty()) prefixes.insert(toks.front());
      ++r.n_questions;
    }
    aqp_sum += static_cast<double>(prefixes.size());
    if (g.questions.size() >= 2) to_embed.insert(to_embed.end(), g.questions.begin(), g.questions.end());
  }
  r.avg_length = r.n_questions == 0 ? 0.0 : static_cast<double>(total_tokens) / r.n_questions;
  r.vocab_size = vocab.size();
  r.aqp = aqp_sum / static_cast<double>(groups.size());

  if (!to_embed.empty()) {
    const auto vecs = embedder(to_embed);
    if (vecs.size() != to_embed.size()) throw std::runtime_error("embedder returned the wrong number of vectors");
    double doc_sum = 0.0;
    std::size_t docs = 0;
    std::size_t at = 0;
    for (const auto& g : groups) {
      const std::size_t n = g.questions.size();
      if (n < 2) continue;
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) s += cosine(vecs[at + i], vecs[at + j]);
      }
      doc_sum += s / static_cast<double>(n * (n - 1) / 2);
      ++docs;
      at += n;
    }
    r.aps = doc_sum / static_cast<double>(docs);
  }
  return r;
}

DiversityReport analyze(std::span<const QuestionRecord> records, const Embedder& embedder,
                        DiversityOptions options) {
  const auto groups = group_by_doc(records);
  auto report = diversity_report(groups, embedder, options);
  const auto labels = label_questions(records);
  report.type_distribution = type_distribution(labels);
  return report;
}

std::string report_to_json(const DiversityReport& report, std::string_view name) {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["n_questions"] = report.n_questions;
  j["avg_length"] = report.avg_length;
  j["vocab_size"] = report.vocab_size;
  j["aps"] = report.aps ? nlohmann::ordered_json(*report.aps) : nlohmann::ordered_json(nullptr);
  j["aqp"] = report.aqp;
  if (report.type_distribution) {
    nlohmann::ordered_json dist;
    for (std::size_t i = 0; i < 4; ++i) dist[std::string(to_string(kTypeCodes[i]))] = (*report.type_distribution)[i];
    j["type_distribution"] = dist;
  }
  return j.dump(2) + "\n";
}

std::string report_table(std::span<const std::pair<std::string, DiversityReport>> rows) {
  std::vector<std::vector<std::string>> cells{{"name", "n", "length", "vocab", "APS", "AQP", "OA", "OU", "NOA", "NOU"}};
  for (const auto& [name, r] : rows) {
    std::vector<std::string> row{name,          std::to_string(r.n_questions), fmt(r.avg_length, 2),
                                 std::to_string(r.vocab_size), r.aps ? fmt(*r.aps, 3) : "-", fmt(r.aqp, 2)};
    for (std::size_t i = 0; i < 4; ++i) row.push_back(r.type_distribution ? fmt((*r.type_distribution)[i], 1) : "-");
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  for (const auto& row : cells) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == 0) {
        line += row[c] + std::string(width[c] - row[c].size(), ' ');
      } else {
        line += "  " + std::string(width[c] - row[c].size(), ' ') + row[c];
      }
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace clinqa::analysis
