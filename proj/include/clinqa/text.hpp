#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Byte-level text helpers shared by every module. All offsets held in memory
// are byte offsets into UTF-8 strings; files exchanged with other tools carry
// code point offsets and are converted with the utf8 helpers below.
namespace clinqa::text {

inline bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// ASCII punctuation, the same 32 characters as Python's string.punctuation.
bool is_punct(unsigned char c);

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

struct WordSpan {
  std::size_t begin;
  std::size_t end;
};

// A word is a maximal run of non-whitespace bytes.
std::vector<WordSpan> word_spans(std::string_view s);
std::vector<std::string_view> split_ws(std::string_view s);
std::size_t count_words(std::string_view s);

bool iequals(std::string_view a, std::string_view b);

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0);
std::string hex64(std::uint64_t v);

// Number of code points in s (invalid continuation bytes count as their own
// code point so the mapping stays total).
std::size_t utf8_length(std::string_view s);
// Code point index of the byte offset; byte_offset is clamped to s.size().
std::size_t byte_to_char(std::string_view s, std::size_t byte_offset);
// Byte offset of the code point index, or nullopt if it lies past the end.
std::optional<std::size_t> char_to_byte(std::string_view s, std::size_t char_offset);

}  // namespace clinqa::text
