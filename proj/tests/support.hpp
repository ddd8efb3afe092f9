#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "clinqa/corpus.hpp"

namespace support {

namespace fs = std::filesystem;

inline fs::path data_dir() { return CLINQA_TEST_DATA_DIR; }
inline fs::path prompts_dir() { return CLINQA_PROMPTS_DIR; }

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("clinqa-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline const std::vector<std::string>& organs() {
  static const std::vector<std::string> v{"liver",  "spleen",   "colon",       "pancreas",     "gallbladder",
                                          "kidney", "bladder",  "aorta",       "lung base",    "right lower lobe",
                                          "stomach", "sample", "adrenal gland", "small bowel", "pleura"};
  return v;
}

inline const std::vector<std::string>& findings() {
  static const std::vector<std::string> v{
      "a small hypodense lesion", "mild wall thickening",   "no focal abnormality",  "a stable calcified nodule",
      "trace free fluid",         "postsurgical changes",   "diffuse fatty infiltration", "a simple cyst",
      "patchy opacity",           "subtle stranding",       "interval enlargement",  "unchanged drainage catheter"};
  return v;
}

// Radiology-style report; section presence is controllable.
inline clinqa::corpus::Document radiology_report(std::size_t i, bool with_findings = true,
                                                 bool with_impression = true) {
  std::mt19937_64 rng(1000 + i);
  auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
  std::string body = "EXAMINATION: CT abdomen and pelvis.\nHISTORY: abdominal pain, case " + std::to_string(i) + ".\n";
  if (with_findings) {
    body += "FINDINGS:";
    for (int s = 0; s < 4; ++s) body += " The " + pick(organs()) + " demonstrates " + pick(findings()) + ".";
    body += "\n";
  }
  if (with_impression) {
    body += "IMPRESSION:";
    for (int s = 0; s < 2; ++s) body += " There is " + pick(findings()) + " involving the " + pick(organs()) + ".";
    body += "\n";
  }
  char id[32];
  std::snprintf(id, sizeof id, "rad%04zu", i);
  return clinqa::corpus::make_document(id, body);
}

inline std::vector<clinqa::corpus::Document> radiology_corpus(std::size_t n) {
  std::vector<clinqa::corpus::Document> docs;
  for (std::size_t i = 0; i < n; ++i) docs.push_back(radiology_report(i));
  return docs;
}

inline const std::vector<std::string>& note_words() {
  static const std::vector<std::string> v{
      "patient",    "admitted",   "with",       "worsening",  "dyspnea",     "and",        "chest",
      "pain",       "treated",    "heparin",    "diuresis",   "improved",    "cardiology", "consulted",
      "echo",       "showed",     "reduced",    "ejection",   "fraction",    "started",    "metoprolol",
      "lisinopril", "discharged", "home",       "follow",     "clinic",      "weeks",      "blood",
      "pressure",   "stable",     "renal",      "function",   "creatinine",  "baseline",   "insulin",
      "glucose",    "monitored",  "wound",      "healing",    "antibiotics", "completed",  "culture",
      "negative",   "afebrile",   "ambulating", "tolerating", "diet",        "oxygen",     "saturation",
      "room",       "air",        "pneumonia",  "resolved",   "edema",       "decreased",  "weight"};
  return v;
}

// Narrative note with exactly `words` words, split into short sentences.
inline clinqa::corpus::Document clinical_note(const std::string& id, std::size_t words, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::string body;
  std::size_t in_sentence = 0;
  const std::size_t sentence_len = 9;
  for (std::size_t w = 0; w < words; ++w) {
    if (!body.empty()) body += ' ';
    std::string word = note_words()[rng() % note_words().size()];
    if (in_sentence == 0) word[0] = static_cast<char>(word[0] - 'a' + 'A');
    body += word;
    if (++in_sentence == sentence_len || w + 1 == words) {
      body += '.';
      in_sentence = 0;
    }
  }
  return clinqa::corpus::make_document(id, body);
}

}  // namespace support
