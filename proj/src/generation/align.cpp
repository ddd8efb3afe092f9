#include "clinqa/generation.hpp"
#include "clinqa/text.hpp"

namespace clinqa::generation {

namespace {

// Lowercased text with punctuation dropped and whitespace runs collapsed to
// one space; origin[i] is the byte of `s` that produced out[i].
struct Folded {
  std::string out;
  std::vector<std::size_t> origin;
};

Folded fold(std::string_view s) {
  Folded f;
  f.out.reserve(s.size());
  f.origin.reserve(s.size());
  bool pending_space = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (text::is_punct(c)) continue;
    if (text::is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !f.out.empty()) {
      f.out.push_back(' ');
      f.origin.push_back(i);
    }
    pending_space = false;
    f.out.push_back(c < 0x80 ? static_cast<char>(c >= 'A' && c <= 'Z' ? c | 0x20 : c) : static_cast<char>(c));
    f.origin.push_back(i);
  }
  return f;
}

}  // namespace

std::optional<Alignment> align_answer(std::string_view answer, std::string_view context) {
  if (answer.empty()) throw std::invalid_argument("align_answer: empty answer");

  if (auto pos = context.find(answer); pos != std::string_view::npos) return Alignment{pos, answer.size(), 1};

  const auto needle = text::trim(answer);
  if (needle.empty()) return std::nullopt;
  const std::string lower_ctx = text::to_lower(context);
  if (auto pos = lower_ctx.find(text::to_lower(needle)); pos != std::string::npos) {
    return Alignment{pos, needle.size(), 2};
  }

  const Folded hay = fold(context);
  const Folded pin = fold(needle);
  if (pin.out.empty()) return std::nullopt;
  const auto pos = hay.out.find(pin.out);
  if (pos == std::string::npos) return std::nullopt;
  const std::size_t begin = hay.origin[pos];
  std::size_t end = hay.origin[pos + pin.out.size() - 1] + 1;
  // keep whole UTF-8 sequences
  while (end < context.size() && (static_cast<unsigned char>(context[end]) & 0xC0) == 0x80) ++end;
  return Alignment{begin, end - begin, 3};
}

}  // namespace clinqa::generation
