#!/usr/bin/env python3
"""Regenerate the builtin bitmap font table (src/patchtext/data/glyphs.txt).

The table is the single source of truth for the rasterizer: a plain-text,
audit-friendly list of glyph bitmaps that ships as package data.  This script
exists so the table can be rebuilt or extended; the generated file is checked
in and the library only ever parses it.

Design rules enforced here (and re-checked by the library's loader):

  * Cells are 16 rows tall.  Caps, digits and ascenders occupy rows 4..10,
    x-height letters rows 6..10, descenders reach row 13, accents live in
    rows 0..5.  Rows 14..15 stay clear.
  * Ink is binary (.``=0``, #``=255``) and horizontally tight: every inked
    glyph has ink in column 0 and in column ink_width-1.  Tightness is what
    lets the renderer compute word ink extents from advances alone.
  * ink_width <= 7 for every glyph, so any two glyphs plus the 1px
    proportional gap fit a 16px patch, and every glyph fits an 8px mono cell.
  * The space glyph has zero ink and a fixed 3px proportional advance; all
    other glyphs advance ink_width+1 proportionally and 8 in mono.

Coverage: printable ASCII (U+0020..U+007E) plus the Latin-1 letters
(U+00C0..U+00FF excluding the multiplication and division signs), plus a
boxed notdef fallback.

Usage:
  python tools/build_font_table.py                 # rewrite the table
  python tools/build_font_table.py --check         # verify table is current
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

CELL = 16
MAX_INK = 7
CAP_TOP = 4     # first row of caps / digits / ascenders
X_TOP = 6       # first row of x-height letters
BASELINE = 10   # last row of non-descending bodies
DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "patchtext" / "data" / "glyphs.txt"

# --------------------------------------------------------------------------
# Seed bitmaps.  Each entry: char -> (top_row, list of equal-width rows).
# --------------------------------------------------------------------------

ASCII_GLYPHS: dict[str, tuple[int, list[str]]] = {
    " ": (0, []),
    "!": (CAP_TOP, ["#", "#", "#", "#", "#", ".", "#"]),
    '"': (CAP_TOP, ["#.#", "#.#"]),
    "#": (CAP_TOP, [".#.#.", ".#.#.", "#####", ".#.#.", "#####", ".#.#.", ".#.#."]),
    "$": (CAP_TOP, ["..#..", ".####", "#.#..", ".###.", "..#.#", "####.", "..#.."]),
    "%": (CAP_TOP, ["##..#", "##..#", "...#.", "..#..", ".#...", "#..##", "#..##"]),
    "&": (CAP_TOP, [".##..", "#..#.", "#..#.", ".##..", "#.#.#", "#..#.", ".##.#"]),
    "'": (CAP_TOP, ["#", "#"]),
    "(": (CAP_TOP, [".#", "#.", "#.", "#.", "#.", "#.", ".#"]),
    ")": (CAP_TOP, ["#.", ".#", ".#", ".#", ".#", ".#", "#."]),
    "*": (CAP_TOP, ["..#..", "#.#.#", ".###.", "#.#.#", "..#.."]),
    "+": (X_TOP, ["..#..", "..#..", "#####", "..#..", "..#.."]),
    ",": (9, ["##", "##", ".#", "#."]),
    "-": (8, ["####"]),
    ".": (9, ["##", "##"]),
    "/": (CAP_TOP, ["..#", "..#", ".#.", ".#.", ".#.", "#..", "#.."]),
    "0": (CAP_TOP, [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."]),
    "1": (CAP_TOP, [".#.", "##.", ".#.", ".#.", ".#.", ".#.", "###"]),
    "2": (CAP_TOP, [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"]),
    "3": (CAP_TOP, [".###.", "#...#", "....#", "..##.", "....#", "#...#", ".###."]),
    "4": (CAP_TOP, ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."]),
    "5": (CAP_TOP, ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."]),
    "6": (CAP_TOP, [".###.", "#....", "#....", "####.", "#...#", "#...#", ".###."]),
    "7": (CAP_TOP, ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."]),
    "8": (CAP_TOP, [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."]),
    "9": (CAP_TOP, [".###.", "#...#", "#...#", ".####", "....#", "....#", ".###."]),
    ":": (7, ["#", ".", ".", "#"]),
    ";": (7, [".#", "..", "..", ".#", ".#", "#."]),
    "<": (CAP_TOP, ["...#", "..#.", ".#..", "#...", ".#..", "..#.", "...#"]),
    "=": (7, ["####", "....", "####"]),
    ">": (CAP_TOP, ["#...", ".#..", "..#.", "...#", "..#.", ".#..", "#..."]),
    "?": (CAP_TOP, [".###.", "#...#", "....#", "...#.", "..#..", ".....", "..#.."]),
    "@": (CAP_TOP, [".####.", "#....#", "#.##.#", "#.##.#", "#.###.", "#.....", ".####."]),
    "A": (CAP_TOP, ["..#..", ".#.#.", "#...#", "#...#", "#####", "#...#", "#...#"]),
    "B": (CAP_TOP, ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."]),
    "C": (CAP_TOP, [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."]),
    "D": (CAP_TOP, ["####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."]),
    "E": (CAP_TOP, ["#####", "#....", "#....", "####.", "#....", "#....", "#####"]),
    "F": (CAP_TOP, ["#####", "#....", "#....", "####.", "#....", "#....", "#...."]),
    "G": (CAP_TOP, [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".###."]),
    "H": (CAP_TOP, ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"]),
    "I": (CAP_TOP, ["###", ".#.", ".#.", ".#.", ".#.", ".#.", "###"]),
    "J": (CAP_TOP, ["..##", "...#", "...#", "...#", "...#", "#..#", ".##."]),
    "K": (CAP_TOP, ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"]),
    "L": (CAP_TOP, ["#....", "#....", "#....", "#....", "#....", "#....", "#####"]),
    "M": (CAP_TOP, ["#.....#", "##...##", "#.#.#.#", "#..#..#", "#.....#", "#.....#", "#.....#"]),
    "N": (CAP_TOP, ["#...#", "##..#", "##..#", "#.#.#", "#..##", "#..##", "#...#"]),
    "O": (CAP_TOP, [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    "P": (CAP_TOP, ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."]),
    "Q": (CAP_TOP, [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"]),
    "R": (CAP_TOP, ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"]),
    "S": (CAP_TOP, [".####", "#....", "#....", ".###.", "....#", "....#", "####."]),
    "T": (CAP_TOP, ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."]),
    "U": (CAP_TOP, ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."]),
    "V": (CAP_TOP, ["#...#", "#...#", "#...#", "#...#", ".#.#.", ".#.#.", "..#.."]),
    "W": (CAP_TOP, ["#.....#", "#.....#", "#.....#", "#..#..#", "#.#.#.#", "##...##", "#.....#"]),
    "X": (CAP_TOP, ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"]),
    "Y": (CAP_TOP, ["#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."]),
    "Z": (CAP_TOP, ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"]),
    "[": (CAP_TOP, ["##", "#.", "#.", "#.", "#.", "#.", "##"]),
    "\\": (CAP_TOP, ["#..", "#..", ".#.", ".#.", ".#.", "..#", "..#"]),
    "]": (CAP_TOP, ["##", ".#", ".#", ".#", ".#", ".#", "##"]),
    "^": (CAP_TOP, ["..#..", ".#.#.", "#...#"]),
    "_": (12, ["#####"]),
    "`": (CAP_TOP, ["#.", ".#"]),
    "a": (X_TOP, [".##.", "...#", ".###", "#..#", ".###"]),
    "b": (CAP_TOP, ["#...", "#...", "###.", "#..#", "#..#", "#..#", "###."]),
    "c": (X_TOP, [".###", "#...", "#...", "#...", ".###"]),
    "d": (CAP_TOP, ["...#", "...#", ".###", "#..#", "#..#", "#..#", ".###"]),
    "e": (X_TOP, [".##.", "#..#", "####", "#...", ".###"]),
    "f": (CAP_TOP, ["..##", ".#..", "###.", ".#..", ".#..", ".#..", ".#.."]),
    "g": (X_TOP, [".###", "#..#", "#..#", "#..#", ".###", "...#", "#..#", ".##."]),
    "h": (CAP_TOP, ["#...", "#...", "###.", "#..#", "#..#", "#..#", "#..#"]),
    "i": (CAP_TOP, ["#", ".", "#", "#", "#", "#", "#"]),
    "j": (CAP_TOP, [".#", "..", ".#", ".#", ".#", ".#", ".#", ".#", ".#", "#."]),
    "k": (CAP_TOP, ["#...", "#...", "#..#", "#.#.", "##..", "#.#.", "#..#"]),
    "l": (CAP_TOP, ["#.", "#.", "#.", "#.", "#.", "#.", ".#"]),
    "m": (X_TOP, ["##.#.", "#.#.#", "#.#.#", "#.#.#", "#.#.#"]),
    "n": (X_TOP, ["###.", "#..#", "#..#", "#..#", "#..#"]),
    "o": (X_TOP, [".##.", "#..#", "#..#", "#..#", ".##."]),
    "p": (X_TOP, ["###.", "#..#", "#..#", "#..#", "###.", "#...", "#...", "#..."]),
    "q": (X_TOP, [".###", "#..#", "#..#", "#..#", ".###", "...#", "...#", "...#"]),
    "r": (X_TOP, ["#.##", "##..", "#...", "#...", "#..."]),
    "s": (X_TOP, [".###", "#...", ".##.", "...#", "###."]),
    "t": (CAP_TOP, [".#.", ".#.", "###", ".#.", ".#.", ".#.", "..#"]),
    "u": (X_TOP, ["#..#", "#..#", "#..#", "#..#", ".###"]),
    "v": (X_TOP, ["#...#", "#...#", ".#.#.", ".#.#.", "..#.."]),
    "w": (X_TOP, ["#...#", "#...#", "#.#.#", "#.#.#", ".#.#."]),
    "x": (X_TOP, ["#...#", ".#.#.", "..#..", ".#.#.", "#...#"]),
    "y": (X_TOP, ["#..#", "#..#", "#..#", "#..#", ".###", "...#", "#..#", ".##."]),
    "z": (X_TOP, ["####", "..#.", ".#..", "#...", "####"]),
    "{": (CAP_TOP, ["..#", ".#.", ".#.", "#..", ".#.", ".#.", "..#"]),
    "|": (CAP_TOP, ["#", "#", "#", "#", "#", "#", "#", "#", "#"]),
    "}": (CAP_TOP, ["#..", ".#.", ".#.", "..#", ".#.", ".#.", "#.."]),
    "~": (7, [".##.#", "#..#."]),
}

# Hand-drawn Latin-1 letters that are not base+mark compositions.
CUSTOM_GLYPHS: dict[str, tuple[int, list[str]]] = {
    "Æ": (CAP_TOP, ["..####", ".#.#..", "#..#..", "######", "#..#..", "#..#..", "#..###"]),  # AE
    "Ð": (CAP_TOP, [".####.", ".#...#", ".#...#", "###..#", ".#...#", ".#...#", ".####."]),  # Eth
    "Ø": (CAP_TOP, [".###.", "#..##", "#.#.#", "#.#.#", "#.#.#", "##..#", ".###."]),         # O slash
    "Þ": (CAP_TOP, ["#....", "####.", "#...#", "#...#", "####.", "#....", "#...."]),         # Thorn
    "ß": (CAP_TOP, [".##.", "#..#", "#.#.", "#..#", "#..#", "#.#.", "#..."]),                # sharp s
    "æ": (X_TOP, ["##.##.", "..#..#", ".#####", "#.#...", ".##.##"]),                        # ae
    "ð": (CAP_TOP, ["#.#.", ".##.", "..#.", ".###", "#..#", "#..#", ".##."]),                # eth
    "ø": (X_TOP, [".###", "#.##", "#.##", "##.#", "###."]),                                  # o slash
    "þ": (CAP_TOP, ["#...", "#...", "###.", "#..#", "#..#", "#..#", "###.", "#...", "#...", "#..."]),  # thorn
}

# Diacritic marks.  Marks sit one clear row above the base body (ring touches
# when space runs out); the cedilla hangs from the baseline.
MARKS: dict[str, tuple[list[str], str]] = {
    "grave": (["#.", ".#"], "above"),
    "acute": ([".#", "#."], "above"),
    "circumflex": ([".#.", "#.#"], "above"),
    "tilde": ([".#.#", "#.#."], "above"),
    "diaeresis": (["#.#"], "above"),
    "ring": ([".#.", "#.#", ".#."], "above"),
    "cedilla": ([".#", "##"], "below"),
}

# Composed Latin-1 letters: char -> (base key, mark name).  The pseudo-base
# "dotless-i" is the bare i stem.
COMPOSED: dict[str, tuple[str, str]] = {
    "À": ("A", "grave"), "Á": ("A", "acute"), "Â": ("A", "circumflex"),
    "Ã": ("A", "tilde"), "Ä": ("A", "diaeresis"), "Å": ("A", "ring"),
    "Ç": ("C", "cedilla"),
    "È": ("E", "grave"), "É": ("E", "acute"), "Ê": ("E", "circumflex"),
    "Ë": ("E", "diaeresis"),
    "Ì": ("I", "grave"), "Í": ("I", "acute"), "Î": ("I", "circumflex"),
    "Ï": ("I", "diaeresis"),
    "Ñ": ("N", "tilde"),
    "Ò": ("O", "grave"), "Ó": ("O", "acute"), "Ô": ("O", "circumflex"),
    "Õ": ("O", "tilde"), "Ö": ("O", "diaeresis"),
    "Ù": ("U", "grave"), "Ú": ("U", "acute"), "Û": ("U", "circumflex"),
    "Ü": ("U", "diaeresis"),
    "Ý": ("Y", "acute"),
    "à": ("a", "grave"), "á": ("a", "acute"), "â": ("a", "circumflex"),
    "ã": ("a", "tilde"), "ä": ("a", "diaeresis"), "å": ("a", "ring"),
    "ç": ("c", "cedilla"),
    "è": ("e", "grave"), "é": ("e", "acute"), "ê": ("e", "circumflex"),
    "ë": ("e", "diaeresis"),
    "ì": ("dotless-i", "grave"), "í": ("dotless-i", "acute"),
    "î": ("dotless-i", "circumflex"), "ï": ("dotless-i", "diaeresis"),
    "ñ": ("n", "tilde"),
    "ò": ("o", "grave"), "ó": ("o", "acute"), "ô": ("o", "circumflex"),
    "õ": ("o", "tilde"), "ö": ("o", "diaeresis"),
    "ù": ("u", "grave"), "ú": ("u", "acute"), "û": ("u", "circumflex"),
    "ü": ("u", "diaeresis"),
    "ý": ("y", "acute"), "ÿ": ("y", "diaeresis"),
}

PSEUDO_BASES: dict[str, tuple[int, list[str]]] = {
    "dotless-i": (X_TOP, ["#", "#", "#", "#", "#"]),
}

NOTDEF = (CAP_TOP, ["#####", "#...#", "#.#.#", "#...#", "#.#.#", "#...#", "#####"])


def cell_rows(top: int, rows: list[str]) -> list[str]:
    """Pad a glyph body to the full 16-row cell."""
    width = len(rows[0]) if rows else 0
    blank = "." * width
    out = [blank] * top + list(rows)
    out.extend([blank] * (CELL - len(out)))
    return out


def overlay(dst: list[str], src: list[str], top: int, left: int) -> list[str]:
    out = list(dst)
    for r, row in enumerate(src):
        line = list(out[top + r])
        for c, px in enumerate(row):
            if px == "#":
                line[left + c] = "#"
        out[top + r] = "".join(line)
    return out


def compose(base_key: str, mark_name: str) -> tuple[int, list[str]]:
    base_top, base_rows = ASCII_GLYPHS.get(base_key) or PSEUDO_BASES[base_key]
    mark_rows, side = MARKS[mark_name]
    bw = len(base_rows[0])
    mw = len(mark_rows[0])
    width = max(bw, mw)
    canvas = ["." * width] * CELL
    canvas = overlay(canvas, base_rows, base_top, (width - bw) // 2)
    if side == "above":
        mark_top = base_top - len(mark_rows) - 1
        if mark_top < 0:
            mark_top = base_top - len(mark_rows)
    else:
        mark_top = BASELINE + 1
    canvas = overlay(canvas, mark_rows, mark_top, (width - mw) // 2)
    top = next(i for i, row in enumerate(canvas) if "#" in row)
    bottom = max(i for i, row in enumerate(canvas) if "#" in row)
    return top, canvas[top : bottom + 1]


def validate(name: str, top: int, rows: list[str]) -> None:
    if not rows:
        if name != "U+0020":
            raise SystemExit(f"{name}: only the space glyph may be blank")
        return
    width = len(rows[0])
    if not 1 <= width <= MAX_INK:
        raise SystemExit(f"{name}: ink width {width} outside 1..{MAX_INK}")
    if any(len(r) != width for r in rows):
        raise SystemExit(f"{name}: ragged rows")
    if any(set(r) - {".", "#"} for r in rows):
        raise SystemExit(f"{name}: bad pixel characters")
    if top < 0 or top + len(rows) > CELL:
        raise SystemExit(f"{name}: rows {top}..{top + len(rows) - 1} outside the cell")
    if not any(r[0] == "#" for r in rows):
        raise SystemExit(f"{name}: no ink in column 0 (not tight)")
    if not any(r[width - 1] == "#" for r in rows):
        raise SystemExit(f"{name}: no ink in last column (not tight)")


def build_table() -> list[tuple[str, int, list[str]]]:
    """Return records (name, ink_width, 16 full rows), sorted by codepoint."""
    glyphs: dict[str, tuple[int, list[str]]] = dict(ASCII_GLYPHS)
    glyphs.update(CUSTOM_GLYPHS)
    for ch, (base, mark) in COMPOSED.items():
        glyphs[ch] = compose(base, mark)

    records = []
    for ch in sorted(glyphs, key=ord):
        top, rows = glyphs[ch]
        name = f"U+{ord(ch):04X}"
        validate(name, top, rows)
        width = len(rows[0]) if rows else 0
        records.append((name, width, cell_rows(top, rows)))
    top, rows = NOTDEF
    validate("notdef", top, rows)
    records.append(("notdef", len(rows[0]), cell_rows(top, rows)))
    return records


def render_table(records: list[tuple[str, int, list[str]]]) -> str:
    lines = [
        "# patchtext builtin bitmap font, format v1",
        "# Generated by tools/build_font_table.py -- do not edit by hand.",
        "# Record: 'glyph <U+XXXX|notdef> ink=<w>' then 16 rows '|cols|',",
        "# '.'=background(0) '#'=ink(255).  Ink is tight in [0, ink_width).",
        "",
    ]
    for name, width, rows in records:
        comment = ""
        if name.startswith("U+"):
            ch = chr(int(name[2:], 16))
            if ch.isprintable() and not ch.isspace():
                comment = f"  # {ch}"
        lines.append(f"glyph {name} ink={width}{comment}")
        lines.extend(f"|{row}|" for row in rows)
        lines.append("")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    parser.add_argument("--check", action="store_true",
                        help="verify the checked-in table matches this generator")
    args = parser.parse_args(argv)

    text = render_table(build_table())
    if args.check:
        current = args.out.read_text(encoding="utf-8") if args.out.exists() else ""
        if current != text:
            print(f"{args.out} is stale; rerun tools/build_font_table.py", file=sys.stderr)
            return 1
        print(f"{args.out} is up to date")
        return 0
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(text, encoding="utf-8")
    n = text.count("glyph ")
    print(f"wrote {args.out} ({n} glyph records)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
