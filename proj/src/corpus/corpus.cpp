#include "clinqa/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "clinqa/error.hpp"
#include "clinqa/text.hpp"

namespace clinqa::corpus {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void check_unique(const std::vector<Document>& docs) {
  std::unordered_set<std::string> seen;
  for (const auto& d : docs) {
    if (!seen.insert(d.id).second) throw DataError("duplicate document id '" + d.id + "'");
  }
}

bool is_alnum(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

// Rejection sampling keeps the draw unbiased and, unlike
// std::uniform_int_distribution, identical across standard libraries.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  std::uint64_t x = 0;
  do {
    x = rng();
  } while (x < threshold);
  return x % bound;
}

const json& require(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(where + ": missing field '" + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_string()) throw DataError(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

Document make_document(std::string id, std::string body) {
  Document d;
  d.id = std::move(id);
  d.text = std::move(body);
  d.word_count = text::count_words(d.text);
  return d;
}

Format parse_format(std::string_view name) {
  if (name == "squad_v2") return Format::squad_v2;
  if (name == "plain_text_dir") return Format::plain_text_dir;
  if (name == "jsonl") return Format::jsonl;
  throw ConfigError("unknown corpus format '" + std::string(name) + "' (expected squad_v2, plain_text_dir or jsonl)");
}

std::string_view to_string(Format f) {
  switch (f) {
    case Format::squad_v2: return "squad_v2";
    case Format::plain_text_dir: return "plain_text_dir";
    case Format::jsonl: return "jsonl";
  }
  return "?";
}

std::size_t SquadDataset::question_count() const {
  std::size_t n = 0;
  for (const auto& a : data)
    for (const auto& p : a.paragraphs) n += p.qas.size();
  return n;
}

SquadDataset parse_squad(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed SQuAD JSON: ") + e.what());
  }
  if (!root.is_object()) throw DataError("SQuAD root must be an object");
  SquadDataset ds;
  if (auto v = root.find("version"); v != root.end() && v->is_string()) ds.version = v->get<std::string>();
  const json& data = require(root, "data", "SQuAD root");
  if (!data.is_array()) throw DataError("SQuAD root: 'data' must be an array");
  for (std::size_t ai = 0; ai < data.size(); ++ai) {
    const json& art = data[ai];
    const std::string where = "data[" + std::to_string(ai) + "]";
    SquadArticle article;
    if (auto t = art.find("title"); t != art.end() && t->is_string()) article.title = t->get<std::string>();
    const json& paras = require(art, "paragraphs", where);
    for (std::size_t pi = 0; pi < paras.size(); ++pi) {
      const json& p = paras[pi];
      const std::string pwhere = where + ".paragraphs[" + std::to_string(pi) + "]";
      SquadParagraph para;
      para.context = require_string(p, "context", pwhere);
      for (const char* key : {"context_id", "document_id"}) {
        if (auto c = p.find(key); c != p.end() && c->is_string()) {
          para.context_id = c->get<std::string>();
          break;
        }
      }
      if (auto qas = p.find("qas"); qas != p.end()) {
        for (std::size_t qi = 0; qi < qas->size(); ++qi) {
          const json& q = (*qas)[qi];
          const std::string qwhere = pwhere + ".qas[" + std::to_string(qi) + "]";
          SquadQuestion question;
          const json& id = require(q, "id", qwhere);
          question.id = id.is_string() ? id.get<std::string>() : id.dump();
          question.question = require_string(q, "question", qwhere);
          if (auto ans = q.find("answers"); ans != q.end()) {
            for (const json& a : *ans) {
              SquadAnswer answer;
              answer.text = require_string(a, "text", qwhere + ".answers");
              const json& start = require(a, "answer_start", qwhere + ".answers");
              if (!start.is_number_integer() || start.get<long long>() < 0)
                throw DataError(qwhere + ".answers: 'answer_start' must be a non-negative integer");
              answer.answer_start = start.get<std::size_t>();
              question.answers.push_back(std::move(answer));
            }
          }
          if (auto imp = q.find("is_impossible"); imp != q.end() && imp->is_boolean()) {
            question.is_impossible = imp->get<bool>();
          } else {
            question.is_impossible = question.answers.empty();
          }
          para.qas.push_back(std::move(question));
        }
      }
      article.paragraphs.push_back(std::move(para));
    }
    ds.data.push_back(std::move(article));
  }
  return ds;
}

SquadDataset read_squad(const std::filesystem::path& path) { return parse_squad(read_file(path)); }

std::string dump_squad(const SquadDataset& dataset) {
  ordered_json root;
  root["version"] = dataset.version;
  ordered_json data = ordered_json::array();
  for (const auto& article : dataset.data) {
    ordered_json a;
    a["title"] = article.title;
    ordered_json paras = ordered_json::array();
    for (const auto& p : article.paragraphs) {
      ordered_json pj;
      if (p.context_id) pj["context_id"] = *p.context_id;
      pj["context"] = p.context;
      ordered_json qas = ordered_json::array();
      for (const auto& q : p.qas) {
        ordered_json qj;
        qj["id"] = q.id;
        qj["question"] = q.question;
        ordered_json answers = ordered_json::array();
        for (const auto& ans : q.answers) {
          ordered_json aj;
          aj["text"] = ans.text;
          aj["answer_start"] = ans.answer_start;
          answers.push_back(std::move(aj));
        }
        qj["answers"] = std::move(answers);
        qj["is_impossible"] = q.is_impossible;
        qas.push_back(std::move(qj));
      }
      pj["qas"] = std::move(qas);
      paras.push_back(std::move(pj));
    }
    a["paragraphs"] = std::move(paras);
    data.push_back(std::move(a));
  }
  root["data"] = std::move(data);
  return root.dump(2) + "\n";
}

void write_squad(const std::filesystem::path& path, const SquadDataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << dump_squad(dataset);
}

std::vector<std::string> squad_paragraph_ids(const SquadDataset& dataset) {
  std::vector<std::string> ids;
  for (std::size_t ai = 0; ai < dataset.data.size(); ++ai) {
    const auto& article = dataset.data[ai];
    const std::string base = article.title.empty() ? "doc" + std::to_string(ai) : article.title;
    for (std::size_t pi = 0; pi < article.paragraphs.size(); ++pi) {
      const auto& p = article.paragraphs[pi];
      if (p.context_id) {
        ids.push_back(*p.context_id);
      } else if (article.paragraphs.size() == 1) {
        ids.push_back(base);
      } else {
        ids.push_back(base + "#" + std::to_string(pi));
      }
    }
  }
  return ids;
}

std::vector<Document> load_documents(const std::filesystem::path& path, Format format) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) throw DataError("path does not exist: " + path.string());
  std::vector<Document> docs;
  switch (format) {
    case Format::squad_v2: {
      const SquadDataset ds = read_squad(path);
      const auto ids = squad_paragraph_ids(ds);
      std::size_t k = 0;
      for (const auto& a : ds.data)
        for (const auto& p : a.paragraphs) docs.push_back(make_document(ids[k++], p.context));
      break;
    }
    case Format::plain_text_dir: {
      if (!std::filesystem::is_directory(path)) throw DataError(path.string() + " is not a directory");
      std::vector<std::filesystem::path> files;
      for (const auto& entry : std::filesystem::directory_iterator(path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) docs.push_back(make_document(f.stem().string(), read_file(f)));
      break;
    }
    case Format::jsonl: {
      std::istringstream in(read_file(path));
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const std::string where = path.filename().string() + " line " + std::to_string(lineno);
        json rec;
        try {
          rec = json::parse(line);
        } catch (const json::parse_error&) {
          throw DataError(where + ": malformed JSON");
        }
        if (!rec.is_object()) throw DataError(where + ": record must be an object");
        docs.push_back(make_document(require_string(rec, "id", where), require_string(rec, "text", where)));
      }
      break;
    }
  }
  check_unique(docs);
  return docs;
}

std::vector<Section> extract_sections(const Document& doc, std::span<const std::string> headers,
                                      Warnings* warnings) {
  if (headers.empty()) throw std::invalid_argument("extract_sections: headers must be non-empty");
  struct Hit {
    std::size_t pos;
    std::size_t after;
    std::size_t header;
  };
  std::vector<Hit> hits;
  const std::string_view t = doc.text;
  for (std::size_t h = 0; h < headers.size(); ++h) {
    const std::string_view header = headers[h];
    if (header.empty() || header.size() + 1 > t.size()) continue;
    for (std::size_t i = 0; i + header.size() < t.size(); ++i) {
      if (t[i + header.size()] != ':') continue;
      if (i > 0 && is_alnum(static_cast<unsigned char>(t[i - 1]))) continue;
      if (!text::iequals(t.substr(i, header.size()), header)) continue;
      hits.push_back({i, i + header.size() + 1, h});
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.pos < b.pos; });

  std::vector<Section> out;
  std::vector<bool> taken(headers.size(), false);
  for (std::size_t k = 0; k < hits.size(); ++k) {
    const Hit& hit = hits[k];
    if (taken[hit.header]) continue;
    // a hit nested inside a previous header token is not a boundary of its own
    if (k > 0 && hit.pos < hits[k - 1].after) continue;
    taken[hit.header] = true;
    const std::size_t end = k + 1 < hits.size() ? hits[k + 1].pos : t.size();
    if (end <= hit.after) {
      warn(warnings, "section", "doc " + doc.id + ": " + headers[hit.header] + " is empty");
      continue;
    }
    out.push_back({headers[hit.header], hit.after, end});
  }
  for (std::size_t h = 0; h < headers.size(); ++h) {
    if (!taken[h]) warn(warnings, "section", "doc " + doc.id + ": no " + headers[h] + " section");
  }
  std::sort(out.begin(), out.end(), [](const Section& a, const Section& b) { return a.char_start < b.char_start; });
  return out;
}

std::vector<Segment> segment_document(const Document& doc, std::size_t max_words) {
  if (max_words < 1) throw std::invalid_argument("segment_document: max_words must be >= 1");
  const auto words = text::word_spans(doc.text);
  if (words.empty()) throw DataError("document " + doc.id + " is empty; nothing to segment");
  std::vector<Segment> out;
  for (std::size_t first = 0, index = 0; first < words.size(); first += max_words, ++index) {
    const std::size_t next = std::min(first + max_words, words.size());
    Segment s;
    s.doc_id = doc.id;
    s.index = index;
    s.char_start = words[first].begin;
    s.char_end = next < words.size() ? words[next].begin : words.back().end;
    s.word_count = next - first;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::size_t> sample_permutation(std::size_t corpus_size, std::uint64_t seed) {
  std::vector<std::size_t> perm(corpus_size);
  for (std::size_t i = 0; i < corpus_size; ++i) perm[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = corpus_size; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

CorpusSample sample_documents(std::span<const Document> corpus, std::size_t n, std::uint64_t seed) {
  if (n > corpus.size()) {
    throw DataError("cannot sample " + std::to_string(n) + " documents from a corpus of " +
                    std::to_string(corpus.size()));
  }
  const auto perm = sample_permutation(corpus.size(), seed);
  CorpusSample s;
  s.seed = seed;
  s.requested_n = n;
  s.doc_ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) s.doc_ids.push_back(corpus[perm[i]].id);
  return s;
}

std::vector<Document> select_documents(std::span<const Document> corpus, std::span<const std::string> ids) {
  std::unordered_map<std::string_view, const Document*> by_id;
  for (const auto& d : corpus) by_id.emplace(d.id, &d);
  std::vector<Document> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("unknown document id '" + id + "'");
    out.push_back(*it->second);
  }
  return out;
}

}  // namespace clinqa::corpus
