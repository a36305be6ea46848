#include "mpsc/unicode.hpp"

#include <algorithm>

namespace mpsc::unicode {
namespace {

struct CharRange {
  char32_t lo;
  char32_t hi;
  std::uint8_t bits;
};

struct CaseMapping {
  char32_t from;
  char32_t to;
};

#include "unicode_tables.inc"

constexpr char32_t kReplacement = 0xFFFD;

}  // namespace

std::uint8_t classify(char32_t cp) {
  const auto* end = std::end(kCharRanges);
  const auto* it = std::upper_bound(std::begin(kCharRanges), end, cp,
                                    [](char32_t c, const CharRange& r) { return c < r.lo; });
  if (it == std::begin(kCharRanges)) return 0;
  --it;
  return cp <= it->hi ? it->bits : 0;
}

char32_t to_lower(char32_t cp) {
  if (cp < 0x80) return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
  const auto* end = std::end(kLowerMappings);
  const auto* it = std::lower_bound(std::begin(kLowerMappings), end, cp,
                                    [](const CaseMapping& m, char32_t c) { return m.from < c; });
  return (it != end && it->from == cp) ? it->to : cp;
}

namespace {

// Decodes into `out` when non-null; returns false if any sequence was invalid.
bool decode_into(std::string_view utf8, std::u32string* out) {
  bool valid = true;
  auto emit = [&](char32_t cp) {
    if (out) out->push_back(cp);
  };
  std::size_t i = 0;
  const std::size_t n = utf8.size();
  while (i < n) {
    const auto b0 = static_cast<unsigned char>(utf8[i]);
    if (b0 < 0x80) {
      emit(b0);
      ++i;
      continue;
    }
    std::size_t extra = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if ((b0 & 0xE0) == 0xC0) {
      extra = 1, cp = b0 & 0x1F, min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
      extra = 2, cp = b0 & 0x0F, min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
      extra = 3, cp = b0 & 0x07, min = 0x10000;
    } else {
      valid = false;
      emit(kReplacement);
      ++i;
      continue;
    }
    std::size_t j = 1;
    for (; j <= extra && i + j < n; ++j) {
      const auto b = static_cast<unsigned char>(utf8[i + j]);
      if ((b & 0xC0) != 0x80) break;
      cp = (cp << 6) | (b & 0x3F);
    }
    i += j;
    if (j != extra + 1 || cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      valid = false;
      emit(kReplacement);
      continue;
    }
    emit(cp);
  }
  return valid;
}

}  // namespace

bool valid_utf8(std::string_view bytes) { return decode_into(bytes, nullptr); }

std::u32string decode(std::string_view utf8) {
  std::u32string out;
  out.reserve(utf8.size());
  decode_into(utf8, &out);
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t cp : text) append_utf8(out, cp);
  return out;
}

std::string lower(std::string_view utf8) {
  std::string out;
  out.reserve(utf8.size());
  for (char32_t cp : decode(utf8)) append_utf8(out, to_lower(cp));
  return out;
}

}  // namespace mpsc::unicode
