#include "clinqa/text.hpp"

#include <cstdio>

namespace clinqa::text {

bool is_punct(unsigned char c) {
  return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) || (c >= 123 && c <= 126);
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<WordSpan> word_spans(std::string_view s) {
  std::vector<WordSpan> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(static_cast<unsigned char>(s[i]))) ++i;
    if (i == s.size()) break;
    const std::size_t b = i;
    while (i < s.size() && !is_space(static_cast<unsigned char>(s[i]))) ++i;
    out.push_back({b, i});
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  for (const auto& w : word_spans(s)) out.push_back(s.substr(w.begin, w.end - w.begin));
  return out;
}

std::size_t count_words(std::string_view s) { return word_spans(s).size(); }

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    char x = a[i];
    char y = b[i];
    if (x >= 'A' && x <= 'Z') x = static_cast<char>(x - 'A' + 'a');
    if (y >= 'A' && y <= 'Z') y = static_cast<char>(y - 'A' + 'a');
    if (x != y) return false;
  }
  return true;
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ (seed * 0x9e3779b97f4a7c15ULL);
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {
bool is_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }
}  // namespace

std::size_t utf8_length(std::string_view s) { return byte_to_char(s, s.size()); }

std::size_t byte_to_char(std::string_view s, std::size_t byte_offset) {
  if (byte_offset > s.size()) byte_offset = s.size();
  std::size_t n = 0;
  for (std::size_t i = 0; i < byte_offset; ++i) {
    if (!is_continuation(s[i]) || i == 0) ++n;
  }
  return n;
}

std::optional<std::size_t> char_to_byte(std::string_view s, std::size_t char_offset) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_continuation(s[i]) || i == 0) {
      if (n == char_offset) return i;
      ++n;
    }
  }
  if (n == char_offset) return s.size();
  return std::nullopt;
}

}  // namespace clinqa::text
