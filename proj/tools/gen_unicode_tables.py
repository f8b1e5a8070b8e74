#!/usr/bin/env python3
"""Regenerates include/dsra/unicode_tables.hpp from Python's unicodedata.

Covers Latin (incl. Extended-A/B and Extended Additional), Greek and
Cyrillic -- the script repertoire of European ID documents. Run from the
repository root:

    python3 tools/gen_unicode_tables.py > include/dsra/unicode_tables.hpp
"""

import sys
import unicodedata

FOLD_RANGES = [
    (0x00B5, 0x024F),
    (0x0370, 0x03FF),
    (0x0400, 0x052F),
    (0x1E00, 0x1EFF),
]

COMPOSE_RANGES = [
    (0x00C0, 0x024F),
    (0x0370, 0x03FF),
    (0x0400, 0x052F),
    (0x1E00, 0x1EFF),
]


def fold_entries():
    out = []
    for lo, hi in FOLD_RANGES:
        for cp in range(lo, hi + 1):
            ch = chr(cp)
            folded = ch.casefold()
            if folded != ch:
                cps = [ord(c) for c in folded]
                if len(cps) > 3:
                    raise SystemExit(f"fold of U+{cp:04X} longer than 3")
                out.append((cp, cps))
    return out


def compose_entries():
    out = []
    for lo, hi in COMPOSE_RANGES:
        for cp in range(lo, hi + 1):
            ch = chr(cp)
            nfd = unicodedata.normalize("NFD", ch)
            if len(nfd) < 2:
                continue
            if not all(unicodedata.combining(c) for c in nfd[1:]):
                continue
            prefix = unicodedata.normalize("NFC", nfd[:-1])
            if len(prefix) != 1:
                continue
            # Skip composition exclusions: the pair must recompose.
            if unicodedata.normalize("NFC", prefix + nfd[-1]) != ch:
                continue
            out.append((ord(prefix), ord(nfd[-1]), cp))
    out.sort()
    return out


def main():
    folds = fold_entries()
    pairs = compose_entries()
    w = sys.stdout.write
    w("// Generated by tools/gen_unicode_tables.py -- do not edit by hand.\n")
    w(f"// Unicode data version: {unicodedata.unidata_version}\n")
    w("#pragma once\n\n")
    w("#include <cstdint>\n#include <cstddef>\n\n")
    w("namespace dsra::unicode {\n\n")
    w("struct FoldEntry {\n")
    w("  char32_t from;\n")
    w("  char32_t to[3];  // NUL-padded\n")
    w("};\n\n")
    w(f"inline constexpr FoldEntry kFoldTable[{len(folds)}] = {{\n")
    for cp, cps in folds:
        padded = cps + [0] * (3 - len(cps))
        w("    {0x%04X, {0x%04X, 0x%04X, 0x%04X}},\n" % (cp, *padded))
    w("};\n\n")
    w("struct ComposeEntry {\n")
    w("  char32_t base;\n")
    w("  char32_t mark;\n")
    w("  char32_t composed;\n")
    w("};\n\n")
    w(f"inline constexpr ComposeEntry kComposeTable[{len(pairs)}] = {{\n")
    for base, mark, composed in pairs:
        w("    {0x%04X, 0x%04X, 0x%04X},\n" % (base, mark, composed))
    w("};\n\n")
    w("}  // namespace dsra::unicode\n")


if __name__ == "__main__":
    main()
