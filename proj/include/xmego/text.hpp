#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xmego/error.hpp"

namespace xmego::text {

namespace detail {

inline std::pair<char32_t, std::size_t> decode_utf8(std::string_view s, std::size_t pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {0xFFFD, 1};
  }
  if (pos + len > s.size()) return {0xFFFD, 1};
  for (std::size_t i = 1; i < len; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

// Base letters for U+00C0..U+00FF; "" marks a non-letter (× and ÷).
inline constexpr std::array<std::string_view, 64> kLatin1 = {
    "a", "a", "a", "a", "ae", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    "d", "n", "o", "o", "o", "o", "oe", "",  "o", "u", "u", "u", "ue", "y", "th", "ss",
    "a", "a", "a", "a", "ae", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
    "d", "n", "o", "o", "o", "o", "oe", "",  "o", "u", "u", "u", "ue", "y", "th", "y"};

// Base letters for Latin Extended-A, U+0100..U+017F.
inline constexpr std::array<std::string_view, 128> kLatinExtA = {
    "a",  "a",  "a", "a", "a", "a", "c", "c", "c", "c", "c", "c", "c", "c", "d", "d",
    "d",  "d",  "e", "e", "e", "e", "e", "e", "e", "e", "e", "e", "g", "g", "g", "g",
    "g",  "g",  "g", "g", "h", "h", "h", "h", "i", "i", "i", "i", "i", "i", "i", "i",
    "i",  "i",  "ij", "ij", "j", "j", "k", "k", "k", "l", "l", "l", "l", "l", "l", "l",
    "l",  "l",  "l", "n", "n", "n", "n", "n", "n", "n", "n", "n", "o", "o", "o", "o",
    "o",  "o",  "oe", "oe", "r", "r", "r", "r", "r", "r", "s", "s", "s", "s", "s", "s",
    "s",  "s",  "t", "t", "t", "t", "t", "t", "u", "u", "u", "u", "u", "u", "u", "u",
    "u",  "u",  "u", "u", "w", "w", "y", "y", "y", "z", "z", "z", "z", "z", "z", "s"};

enum class CharClass { Word, Mark, Separator };

// Folds one code point to lowercase ASCII. Combining marks attach to the
// current word without producing output.
inline CharClass fold(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    const char c = static_cast<char>(cp);
    if (c >= 'A' && c <= 'Z') {
      out.push_back(static_cast<char>(c - 'A' + 'a'));
      return CharClass::Word;
    }
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      out.push_back(c);
      return CharClass::Word;
    }
    return CharClass::Separator;
  }
  if (cp >= 0xC0 && cp <= 0xFF) {
    const auto base = kLatin1[cp - 0xC0];
    if (base.empty()) return CharClass::Separator;
    out.append(base);
    return CharClass::Word;
  }
  if (cp >= 0x100 && cp <= 0x17F) {
    out.append(kLatinExtA[cp - 0x100]);
    return CharClass::Word;
  }
  if (cp == 0x1E9E) {
    out.append("ss");
    return CharClass::Word;
  }
  if (cp >= 0x300 && cp <= 0x36F) {
    // A decomposed umlaut gets the same spelling as the precomposed one.
    if (cp == 0x308 && !out.empty() && (out.back() == 'a' || out.back() == 'o' || out.back() == 'u')) {
      out.push_back('e');
    }
    return CharClass::Mark;
  }
  return CharClass::Separator;
}

}  // namespace detail

// A maximal run of word characters in the original text, with its folded form.
struct WordSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::string folded;
};

inline std::vector<WordSpan> word_spans(std::string_view raw) {
  std::vector<WordSpan> spans;
  std::optional<WordSpan> current;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    const auto [cp, len] = detail::decode_utf8(raw, pos);
    std::string scratch = current ? std::move(current->folded) : std::string{};
    const auto cls = detail::fold(cp, scratch);
    if (cls == detail::CharClass::Separator || (cls == detail::CharClass::Mark && !current)) {
      if (current) {
        current->folded = std::move(scratch);
        spans.push_back(std::move(*current));
        current.reset();
      }
    } else {
      if (!current) current = WordSpan{pos, pos, {}};
      current->folded = std::move(scratch);
      current->end = pos + len;
    }
    pos += len;
  }
  if (current) spans.push_back(std::move(*current));
  return spans;
}

inline std::vector<std::string> words(std::string_view raw) {
  std::vector<std::string> out;
  for (auto& span : word_spans(raw)) out.push_back(std::move(span.folded));
  return out;
}

// Canonical entity-name token: lowercase ASCII words joined by single underscores.
inline std::string normalize_name(std::string_view raw) {
  std::string out;
  for (const auto& w : words(raw)) {
    if (!out.empty()) out.push_back('_');
    out += w;
  }
  if (out.empty()) throw Error(ErrorCode::EmptyName, "name is empty after normalization", std::string(raw));
  return out;
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto at = s.find(sep, start);
    const auto stop = at == std::string_view::npos ? s.size() : at;
    if (stop > start) parts.emplace_back(s.substr(start, stop - start));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return parts;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace xmego::text
