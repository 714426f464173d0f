"""Deterministic text rasterization onto a 16-pixel-tall canvas.

A small embedded bitmap font replaces external rendering stacks so that every
byte of every rendered line is reproducible across runs and platforms.  The
font ships as a plain-text table (``data/glyphs.txt``) parsed at import time;
see ``tools/build_font_table.py`` for how it is produced and the metric rules
it guarantees.

Conventions:

  * Pixels are 8-bit grayscale with 0 = background (white page) and
    255 = ink (black); the builtin font is binary but the pipeline carries
    the full 8-bit range so antialiased backends can slot in later.
  * Text is normalized to Unicode NFC, then segmented into extended grapheme
    clusters.  A cluster made entirely of whitespace renders as the blank
    space glyph; any other cluster that is not a single covered codepoint
    renders as the boxed notdef glyph.
  * Proportional advance = ink_width + 1 (one blank column between glyphs);
    the space glyph advances 3.  Mono advance is 8 for every cluster, ink
    centered in the cell.

Usage:
    >>> font = load_builtin_font()
    >>> img = raster_line(font, "I must be growing small again.", "proportional")
    >>> img.width == measure_text(font, "I must be growing small again.", "proportional")
    True
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np
import regex

CELL_HEIGHT = 16
BACKGROUND = 0
INK = 255
SPACE_ADVANCE = 3
MONO_ADVANCE = 8
MAX_INK_WIDTH = 16

_MODES = ("proportional", "mono")
_GRAPHEME = regex.compile(r"\X")


class FontTableError(RuntimeError):
    """The embedded glyph table is malformed (a packaging defect, not user error)."""


@dataclass(frozen=True)
class Glyph:
    """One bitmap glyph: a 16-row ink grid plus advance metrics."""

    codepoint: int | None          # None for the notdef fallback
    ink_width: int                 # ink lies within columns [0, ink_width)
    bitmap: np.ndarray             # (16, ink_width) uint8, values {0, 255}
    advance_proportional: int
    advance_mono: int = MONO_ADVANCE

    @property
    def mono_offset(self) -> int:
        """Left padding that centers the ink inside an 8px mono cell."""
        return (MONO_ADVANCE - self.ink_width) // 2


@dataclass(frozen=True)
class LineImage:
    """A rendered line: height always 16, width = sum of advances."""

    width: int
    pixels: np.ndarray             # (16, width) uint8

    def __post_init__(self) -> None:
        if self.pixels.shape != (CELL_HEIGHT, self.width):
            raise ValueError(f"line image shape {self.pixels.shape} != (16, {self.width})")


class FontAtlas:
    """Immutable codepoint -> Glyph map with a notdef fallback.

    Safe to share across threads; every lookup is pure.
    """

    def __init__(self, glyphs: dict[int, Glyph], notdef: Glyph, version: str) -> None:
        self._glyphs = dict(glyphs)
        self.notdef = notdef
        self.version = version

    @property
    def coverage(self) -> frozenset[int]:
        return frozenset(self._glyphs)

    @property
    def space(self) -> Glyph:
        return self._glyphs[0x20]

    def lookup(self, codepoint: int) -> Glyph:
        """Glyph for a codepoint; unknown codepoints fall back to notdef."""
        return self._glyphs.get(codepoint, self.notdef)

    def lookup_cluster(self, cluster: str) -> Glyph:
        """Glyph for one extended grapheme cluster.

        Whitespace-only clusters map to the blank space glyph; multi-codepoint
        clusters (beyond this font's coverage by construction) map to notdef.
        """
        if cluster.isspace():
            return self.space
        if len(cluster) == 1:
            return self.lookup(ord(cluster))
        return self.notdef


def grapheme_clusters(text: str) -> list[str]:
    """NFC-normalize and split into extended grapheme clusters."""
    return _GRAPHEME.findall(unicodedata.normalize("NFC", text))


def _parse_glyph_rows(rows: list[str], name: str, ink_width: int) -> np.ndarray:
    if len(rows) != CELL_HEIGHT:
        raise FontTableError(f"{name}: expected 16 rows, found {len(rows)}")
    bitmap = np.zeros((CELL_HEIGHT, max(ink_width, 1)), dtype=np.uint8)
    for r, row in enumerate(rows):
        if len(row) != ink_width:
            raise FontTableError(f"{name}: row {r} has width {len(row)}, expected {ink_width}")
        for c, px in enumerate(row):
            if px == "#":
                bitmap[r, c] = INK
            elif px != ".":
                raise FontTableError(f"{name}: bad pixel {px!r}")
    return bitmap[:, :ink_width] if ink_width else np.zeros((CELL_HEIGHT, 0), dtype=np.uint8)


def _parse_font_table(text: str) -> FontAtlas:
    glyphs: dict[int, Glyph] = {}
    notdef: Glyph | None = None
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].strip()
        i += 1
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] != "glyph" or len(parts) < 3 or not parts[2].startswith("ink="):
            raise FontTableError(f"bad record header: {line!r}")
        name = parts[1]
        ink_width = int(parts[2][4:])
        if not 0 <= ink_width <= MAX_INK_WIDTH:
            raise FontTableError(f"{name}: ink width {ink_width} out of range")
        rows = []
        while i < len(lines) and lines[i].startswith("|"):
            body = lines[i]
            if not body.endswith("|"):
                raise FontTableError(f"{name}: unterminated row {body!r}")
            rows.append(body[1:-1])
            i += 1
        bitmap = _parse_glyph_rows(rows, name, ink_width)
        bitmap.setflags(write=False)
        if name == "notdef":
            if bitmap.max(initial=0) == 0:
                raise FontTableError("notdef glyph must have ink")
            notdef = Glyph(None, ink_width, bitmap, ink_width + 1)
            continue
        if not name.startswith("U+"):
            raise FontTableError(f"bad glyph name {name!r}")
        cp = int(name[2:], 16)
        advance = SPACE_ADVANCE if cp == 0x20 else ink_width + 1
        if cp != 0x20 and bitmap.max(initial=0) == 0:
            raise FontTableError(f"{name}: blank ink on a non-space glyph")
        if cp in glyphs:
            raise FontTableError(f"duplicate glyph {name}")
        glyphs[cp] = Glyph(cp, ink_width, bitmap, advance)
    if notdef is None:
        raise FontTableError("font table is missing the notdef record")
    if 0x20 not in glyphs:
        raise FontTableError("font table is missing the space glyph")
    return FontAtlas(glyphs, notdef, version="builtin-v1")


@lru_cache(maxsize=1)
def load_builtin_font() -> FontAtlas:
    """Parse the embedded glyph table into an atlas (cached, immutable).

    Coverage is printable ASCII plus the Latin-1 letters.  A malformed table
    raises FontTableError at first load: that is a build defect, never a
    runtime condition user input can trigger.
    """
    text = resources.files("patchtext").joinpath("data/glyphs.txt").read_text("utf-8")
    return _parse_font_table(text)


def _layout(font: FontAtlas, text: str, mode: str) -> tuple[int, list[tuple[str, Glyph, int]]]:
    """Shared layout pass: ((cluster, glyph, x of the advance cell start), ...).

    The returned x is the cell origin; proportional ink starts at x, mono ink
    at x + glyph.mono_offset.  Width is the final cursor position.
    """
    if mode not in _MODES:
        raise ValueError(f"mode must be one of {_MODES}, got {mode!r}")
    placed = []
    x = 0
    for cluster in grapheme_clusters(text):
        glyph = font.lookup_cluster(cluster)
        placed.append((cluster, glyph, x))
        x += glyph.advance_mono if mode == "mono" else glyph.advance_proportional
    return x, placed


def measure_text(font: FontAtlas, text: str, mode: str) -> int:
    """Width in pixels of `text` under the advance mode.

    Mono width is 8 x (number of extended grapheme clusters); proportional
    width is the sum of per-cluster advances.
    """
    width, _ = _layout(font, text, mode)
    return width


def raster_line(font: FontAtlas, text: str, mode: str) -> LineImage:
    """Blit `text` left-to-right into a fresh (16, width) image.

    Pure and byte-deterministic: the same (font, text, mode) always yields the
    same pixels.  Mono rendering is compositional, raster_line(a + b) equals
    raster_line(a) then raster_line(b) side by side.
    """
    width, placed = _layout(font, text, mode)
    pixels = np.zeros((CELL_HEIGHT, width), dtype=np.uint8)
    for _, glyph, x in placed:
        if glyph.ink_width == 0:
            continue
        x0 = x + (glyph.mono_offset if mode == "mono" else 0)
        np.maximum(pixels[:, x0 : x0 + glyph.ink_width], glyph.bitmap,
                   out=pixels[:, x0 : x0 + glyph.ink_width])
    return LineImage(width=width, pixels=pixels)
