#!/usr/bin/env python3
"""Regenerate src/unicode_tables.inc from the Python unicodedata module.

Usage: python3 scripts/gen_unicode_tables.py > src/unicode_tables.inc
"""
import sys
import unicodedata

LETTER, UPPER, DIGIT, PUNCT, SPACE = 1, 2, 4, 8, 16

# Unicode White_Space property.
WHITE_SPACE = set(range(0x09, 0x0E)) | {0x20, 0x85, 0xA0, 0x1680, 0x2028, 0x2029,
                                         0x202F, 0x205F, 0x3000} | set(range(0x2000, 0x200B))
ASCII_PUNCT = set(map(ord, "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~"))
PUNCT_CATS = {"Pc", "Pd", "Ps", "Pe", "Pi", "Pf", "Po"}


def bits(cp):
    cat = unicodedata.category(chr(cp))
    b = 0
    if cat.startswith("L"):
        b |= LETTER
    if cat == "Lu":
        b |= UPPER
    if cat == "Nd":
        b |= DIGIT
    if cat in PUNCT_CATS or cp in ASCII_PUNCT:
        b |= PUNCT
    if cp in WHITE_SPACE:
        b |= SPACE
    return b


def main():
    out = sys.stdout
    out.write("// Generated by scripts/gen_unicode_tables.py from Unicode %s. Do not edit.\n"
              % unicodedata.unidata_version)
    ranges = []
    start, cur = 0, bits(0)
    for cp in range(1, 0x110000):
        b = bits(cp)
        if b != cur:
            if cur:
                ranges.append((start, cp - 1, cur))
            start, cur = cp, b
    if cur:
        ranges.append((start, 0x10FFFF, cur))
    out.write("constexpr CharRange kCharRanges[] = {\n")
    for lo, hi, b in ranges:
        out.write("    {0x%X, 0x%X, %d},\n" % (lo, hi, b))
    out.write("};\n\n")
    pairs = []
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        low = chr(cp).lower()
        if len(low) == 1 and ord(low) != cp:
            pairs.append((cp, ord(low)))
    out.write("constexpr CaseMapping kLowerMappings[] = {\n")
    for cp, low in pairs:
        out.write("    {0x%X, 0x%X},\n" % (cp, low))
    out.write("};\n")


if __name__ == "__main__":
    main()
