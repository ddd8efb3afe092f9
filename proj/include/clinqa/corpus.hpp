#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clinqa/warnings.hpp"

namespace clinqa::corpus {

// Named report subsection, a half-open byte interval of its document.
struct Section {
  std::string name;
  std::size_t char_start = 0;
  std::size_t char_end = 0;

  bool operator==(const Section&) const = default;
};

struct Document {
  std::string id;
  std::string text;
  std::vector<Section> sections;
  std::size_t word_count = 0;

  std::string_view slice(std::size_t begin, std::size_t end) const {
    return std::string_view(text).substr(begin, end - begin);
  }
};

Document make_document(std::string id, std::string body);

// Word-bounded chunk of a document. Consecutive segments of one document
// share boundaries, so their texts concatenate back to the segmented span.
struct Segment {
  std::string doc_id;
  std::size_t index = 0;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  std::size_t word_count = 0;

  bool operator==(const Segment&) const = default;
};

struct CorpusSample {
  std::uint64_t seed = 0;
  std::size_t requested_n = 0;
  std::vector<std::string> doc_ids;

  bool operator==(const CorpusSample&) const = default;
};

enum class Format { squad_v2, plain_text_dir, jsonl };

Format parse_format(std::string_view name);
std::string_view to_string(Format f);

// SQuAD-v2 tree. answer_start values are kept exactly as they appear in the
// file (code point offsets into the paragraph context).
struct SquadAnswer {
  std::string text;
  std::size_t answer_start = 0;
};

struct SquadQuestion {
  std::string id;
  std::string question;
  std::vector<SquadAnswer> answers;
  bool is_impossible = false;
};

struct SquadParagraph {
  std::string context;
  std::optional<std::string> context_id;
  std::vector<SquadQuestion> qas;
};

struct SquadArticle {
  std::string title;
  std::vector<SquadParagraph> paragraphs;
};

struct SquadDataset {
  std::string version = "v2.0";
  std::vector<SquadArticle> data;

  std::size_t question_count() const;
};

SquadDataset parse_squad(std::string_view json_text);
SquadDataset read_squad(const std::filesystem::path& path);
// Canonical serialization: fixed key order, two-space indent, trailing newline.
std::string dump_squad(const SquadDataset& dataset);
void write_squad(const std::filesystem::path& path, const SquadDataset& dataset);

// Stable id of every paragraph, in document order: the paragraph's
// context_id when present, otherwise the article title (suffixed with
// "#<paragraph index>" when the article holds several paragraphs).
std::vector<std::string> squad_paragraph_ids(const SquadDataset& dataset);

std::vector<Document> load_documents(const std::filesystem::path& path, Format format);

// Sections for each header found (case-insensitive, directly followed by ':'),
// spanning from just after the colon to the next header or end of text.
std::vector<Section> extract_sections(const Document& doc, std::span<const std::string> headers,
                                      Warnings* warnings = nullptr);

std::vector<Segment> segment_document(const Document& doc, std::size_t max_words = 500);

// Deterministic permutation of [0, corpus_size) for a seed; samples of size
// n are its first n entries, so smaller samples nest inside larger ones.
std::vector<std::size_t> sample_permutation(std::size_t corpus_size, std::uint64_t seed);
CorpusSample sample_documents(std::span<const Document> corpus, std::size_t n, std::uint64_t seed);

// Selects documents by id, in the order given.
std::vector<Document> select_documents(std::span<const Document> corpus, std::span<const std::string> ids);

inline const std::vector<std::string>& radqa_section_headers() {
  static const std::vector<std::string> headers{"FINDINGS", "IMPRESSION"};
  return headers;
}

}  // namespace clinqa::corpus
