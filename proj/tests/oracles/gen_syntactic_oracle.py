#!/usr/bin/env python3
"""Brute-force character-class oracle for the syntactic counts.

Classifies each code point straight from unicodedata.category and writes
randomized strings with their expected (total, upper, digits, punct, unknown).
Usage: python3 tests/oracles/gen_syntactic_oracle.py > tests/data/syntactic_oracle.jsonl
"""
import json
import random
import string
import unicodedata

WHITE_SPACE = set(range(0x09, 0x0E)) | {0x20, 0x85, 0xA0, 0x1680, 0x2028, 0x2029,
                                         0x202F, 0x205F, 0x3000} | set(range(0x2000, 0x200B))

POOLS = [
    (0x20, 0x7E),        # ASCII printable
    (0x00, 0x1F),        # controls
    (0xA0, 0x24F),       # Latin-1 + Latin extended
    (0x370, 0x3FF),      # Greek
    (0x400, 0x4FF),      # Cyrillic
    (0x600, 0x6FF),      # Arabic (incl. Arabic-Indic digits)
    (0x900, 0x97F),      # Devanagari
    (0x2000, 0x206F),    # general punctuation + spaces
    (0x20A0, 0x20CF),    # currency
    (0x2100, 0x218F),    # letterlike, number forms
    (0x2460, 0x24FF),    # enclosed alphanumerics
    (0x3000, 0x303F),    # CJK punctuation
    (0x4E00, 0x4FFF),    # CJK ideographs
    (0xFF00, 0xFFEF),    # fullwidth forms
    (0x1D400, 0x1D7FF),  # math alphanumerics
    (0x1F300, 0x1F6FF),  # emoji
    (0xE0000, 0xE007F),  # tags
]


def classify(ch):
    cp = ord(ch)
    cat = unicodedata.category(ch)
    upper = cat == "Lu"
    digit = cat == "Nd"
    punct = cat in ("Pc", "Pd", "Ps", "Pe", "Pi", "Pf", "Po") or ch in string.punctuation
    letter = cat[0] == "L"
    space = cp in WHITE_SPACE
    unknown = not (letter or digit or punct or space)
    return upper, digit, punct, unknown


def main():
    rng = random.Random(20240607)
    for _ in range(1200):
        n = rng.randint(0, 40)
        chars = []
        for _ in range(n):
            lo, hi = rng.choice(POOLS)
            cp = rng.randint(lo, hi)
            if 0xD800 <= cp <= 0xDFFF:
                cp = 0x41
            chars.append(chr(cp))
        s = "".join(chars)
        counts = [len(s), 0, 0, 0, 0]
        for ch in s:
            for i, flag in enumerate(classify(ch), start=1):
                counts[i] += int(flag)
        print(json.dumps({"text": s, "counts": counts}))


if __name__ == "__main__":
    main()
