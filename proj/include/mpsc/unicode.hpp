#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mpsc::unicode {

// Character classes shared by cleaning, counting and keyword tokenization.
enum CharClass : std::uint8_t {
  kLetter = 1,
  kUpper = 2,
  kDigit = 4,
  kPunct = 8,
  kSpace = 16,
};

std::uint8_t classify(char32_t cp);

inline bool is_letter(char32_t cp) { return classify(cp) & kLetter; }
inline bool is_upper(char32_t cp) { return classify(cp) & kUpper; }
inline bool is_digit(char32_t cp) { return classify(cp) & kDigit; }
// The 32 ASCII punctuation characters plus categories Pc, Pd, Ps, Pe, Pi, Pf, Po.
inline bool is_punct(char32_t cp) { return classify(cp) & kPunct; }
// Unicode White_Space property.
inline bool is_space(char32_t cp) { return classify(cp) & kSpace; }

// Simple (1:1) lowercase mapping; identity where none exists.
char32_t to_lower(char32_t cp);

bool valid_utf8(std::string_view bytes);

// Decodes UTF-8; invalid or truncated sequences become U+FFFD.
std::u32string decode(std::string_view utf8);
void append_utf8(std::string& out, char32_t cp);
std::string encode(std::u32string_view text);

std::string lower(std::string_view utf8);

}  // namespace mpsc::unicode
