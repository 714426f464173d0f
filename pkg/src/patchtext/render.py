"""The four rendering strategies: text -> 16x16 patch sequences.

Strategies:

  * CONTINUOUS: raster the whole line proportionally and slice every 16px;
    nothing aligns to patch boundaries, so identical words drift across
    boundaries depending on context.
  * BIGRAMS: per whitespace-delimited word, greedily pair grapheme clusters
    and give every pair its own left-aligned patch, so a word's patches are
    identical in every context.
  * MONO: raster the raw stream (spaces included) at a fixed 8px advance and
    slice every 16px; a word has at most two renderings (cell-offset parity).
  * WORDS: raster each word proportionally, starting at the smallest patch
    boundary that keeps at least `min_whitespace` blank pixels after the
    previous word's ink; sometimes that forces a fully blank separator patch.

Every sequence ends with the all-black end-of-sequence patch (all pixels 255
under the 0=background/255=ink convention) and never exceeds
``max_patches`` patches including that EOS.  Content overflowing the cap is
cut at a patch boundary and flagged ``truncated``.

Word spans record which patches carry each word's ink as closed index ranges:
exact and disjoint for BIGRAMS/WORDS (words own their patches), possibly
sharing boundary patches for CONTINUOUS/MONO (pixel-level accounting).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .raster import (
    CELL_HEIGHT,
    INK,
    FontAtlas,
    Glyph,
    _layout,
    grapheme_clusters,
    load_builtin_font,
    raster_line,
)


class Strategy(enum.Enum):
    CONTINUOUS = "continuous"
    BIGRAMS = "bigrams"
    MONO = "mono"
    WORDS = "words"


@dataclass(frozen=True)
class RenderConfig:
    """Rendering constants; defaults are the reference pipeline values."""

    strategy: Strategy = Strategy.CONTINUOUS
    patch_size: int = 16
    max_patches: int = 529          # includes the EOS patch
    min_whitespace: int = 3         # minimum blank pixels between words

    def __post_init__(self) -> None:
        if self.patch_size != 16:
            raise ValueError("patch_size is fixed at 16")
        if self.max_patches < 2:
            raise ValueError("max_patches must be >= 2 (content + EOS)")
        if self.min_whitespace < 1:
            raise ValueError("min_whitespace must be >= 1")
        if not isinstance(self.strategy, Strategy):
            raise ValueError(f"unknown strategy {self.strategy!r}")


@dataclass(frozen=True)
class WordSpan:
    """Closed patch-index range carrying one word's ink."""

    word_index: int
    first: int
    last: int


@dataclass(frozen=True)
class PatchSequence:
    """Ordered patches (EOS last) plus word-to-patch annotations.

    ``words`` holds the whitespace-delimited tokens so spans can be reported
    with their text; sequences reloaded from a patch dump carry spans only
    (``words`` is None there, the dump format stores indices).
    """

    patches: np.ndarray                  # (n, 16, 16) uint8, EOS included
    word_spans: tuple[WordSpan, ...]
    truncated: bool
    strategy: Strategy
    overflow_events: int = 0
    words: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.patches.ndim != 3 or self.patches.shape[1:] != (16, 16):
            raise ValueError(f"patches must be (n, 16, 16), got {self.patches.shape}")
        if self.patches.dtype != np.uint8:
            raise ValueError("patches must be uint8")
        if len(self.patches) < 1 or not (self.patches[-1] == INK).all():
            raise ValueError("sequence must end with the all-black EOS patch")
        for span in self.word_spans:
            if not 0 <= span.first <= span.last < self.eos_index:
                raise ValueError(f"span {span} outside content range")

    @property
    def eos_index(self) -> int:
        return len(self.patches) - 1

    def __len__(self) -> int:
        return len(self.patches)


def eos_patch(patch_size: int = 16) -> np.ndarray:
    """The all-black sequence terminator."""
    return np.full((patch_size, patch_size), INK, dtype=np.uint8)


def segment_word_bigrams(word: str) -> list[str]:
    """Greedy left-to-right pairing of extended grapheme clusters.

    The final group has size 1 iff the cluster count is odd; an empty word
    yields an empty list.

    >>> segment_word_bigrams("growing")
    ['gr', 'ow', 'in', 'g']
    """
    clusters = grapheme_clusters(word)
    return ["".join(clusters[i : i + 2]) for i in range(0, len(clusters), 2)]


def word_patch_spans(seq: PatchSequence) -> list[tuple[str, int, int]]:
    """Stored word annotations as (word, first_patch, last_patch) triples."""
    if seq.words is None:
        raise ValueError("sequence carries no word strings (reloaded from a dump?)")
    return [(seq.words[s.word_index], s.first, s.last) for s in seq.word_spans]


# --------------------------------------------------------------------------
# Layout internals
# --------------------------------------------------------------------------

@dataclass
class _Word:
    index: int
    text: str
    glyphs: list[Glyph] = field(default_factory=list)


def _split_words(text: str, font: FontAtlas) -> list[_Word]:
    """Whitespace-delimited tokens with their cluster glyphs, in order."""
    words: list[_Word] = []
    current: _Word | None = None
    for cluster in grapheme_clusters(text):
        if cluster.isspace():
            current = None
            continue
        if current is None:
            current = _Word(index=len(words), text="")
            words.append(current)
        current.text += cluster
        current.glyphs.append(font.lookup_cluster(cluster))
    return words


def _slice_patches(pixels: np.ndarray, patch_size: int) -> np.ndarray:
    """Cut a (16, W) line image into ceil(W/16) patches, padding the tail."""
    width = pixels.shape[1]
    n = math.ceil(width / patch_size)
    if n == 0:
        return np.zeros((0, patch_size, patch_size), dtype=np.uint8)
    padded = np.zeros((CELL_HEIGHT, n * patch_size), dtype=np.uint8)
    padded[:, :width] = pixels
    return np.ascontiguousarray(padded.reshape(CELL_HEIGHT, n, patch_size).transpose(1, 0, 2))


def _sliced_strategy(text: str, cfg: RenderConfig, font: FontAtlas, mode: str):
    """Shared CONTINUOUS/MONO path: raster the raw stream, slice, account ink.

    Word ink extents come from the same layout arithmetic the rasterizer uses
    (tight glyphs make advance bookkeeping equal pixel-level accounting).
    """
    width, placed = _layout(font, text, mode)
    content = _slice_patches(raster_line(font, text, mode).pixels, cfg.patch_size)

    words: list[str] = []
    spans: list[WordSpan] = []
    extent: tuple[int, int] | None = None   # ink [start, end) of the open word
    in_word = False
    for cluster, glyph, x in placed + [(" ", font.space, width)]:  # sentinel flush
        if cluster.isspace():
            if extent is not None:
                first, last = extent[0] // cfg.patch_size, (extent[1] - 1) // cfg.patch_size
                spans.append(WordSpan(len(words) - 1, first, last))
            extent = None
            in_word = False
            continue
        if not in_word:
            words.append("")
            in_word = True
        words[-1] += cluster
        if glyph.ink_width:
            x0 = x + (glyph.mono_offset if mode == "mono" else 0)
            lo, hi = (x0, x0 + glyph.ink_width) if extent is None else extent
            extent = (min(lo, x0), max(hi, x0 + glyph.ink_width))
    return content, words, spans, 0


def _words_strategy(text: str, cfg: RenderConfig, font: FontAtlas):
    """WORDS: each word rastered proportionally at the next eligible boundary."""
    words = _split_words(text, font)
    positions: list[tuple[_Word, int, int]] = []   # (word, x, ink_width)
    x = 0
    for word in words:
        ink = sum(g.advance_proportional for g in word.glyphs) - 1
        positions.append((word, x, ink))
        boundary = math.ceil((x + ink + cfg.min_whitespace) / cfg.patch_size)
        x = boundary * cfg.patch_size
    total_ink_end = positions[-1][1] + positions[-1][2] if positions else 0
    canvas = np.zeros((CELL_HEIGHT, total_ink_end), dtype=np.uint8)
    spans = []
    for word, wx, ink in positions:
        img = raster_line(font, word.text, "proportional")
        canvas[:, wx : wx + ink] = img.pixels[:, :ink]
        spans.append(WordSpan(word.index, wx // cfg.patch_size, (wx + ink - 1) // cfg.patch_size))
    content = _slice_patches(canvas, cfg.patch_size)
    return content, [w.text for w in words], spans, 0


def _bigrams_strategy(text: str, cfg: RenderConfig, font: FontAtlas):
    """BIGRAMS: one patch per grapheme pair, blank separators per the 3px rule."""
    size = cfg.patch_size
    words = _split_words(text, font)
    content: list[np.ndarray] = []
    spans: list[WordSpan] = []
    overflow = 0
    pending_blanks = 0
    for word in words:
        content.extend(np.zeros((size, size), dtype=np.uint8) for _ in range(pending_blanks))
        first = len(content)
        last_ink = 0
        for i in range(0, len(word.glyphs), 2):
            pair = word.glyphs[i : i + 2]
            ink = sum(g.advance_proportional for g in pair) - 1
            patch = np.zeros((CELL_HEIGHT, max(ink, size)), dtype=np.uint8)
            x = 0
            for g in pair:
                patch[:, x : x + g.ink_width] = g.bitmap
                x += g.advance_proportional
            if ink > size:
                overflow += 1
            content.append(patch[:, :size])
            last_ink = min(ink, size)
        spans.append(WordSpan(word.index, first, len(content) - 1))
        # Next word may start only >= min_whitespace px after this ink ends.
        pending_blanks = math.ceil((last_ink + cfg.min_whitespace) / size) - 1
    stacked = (np.stack(content) if content
               else np.zeros((0, size, size), dtype=np.uint8))
    return stacked, [w.text for w in words], spans, overflow


def render(text: str, cfg: RenderConfig, font: FontAtlas | None = None) -> PatchSequence:
    """Render one line of text into a PatchSequence under cfg.strategy.

    Never fails on content: unsupported codepoints render as notdef.  Content
    beyond max_patches - 1 patches is dropped at a patch boundary (truncated
    flag set, spans crossing the cut removed) and the EOS patch is always
    appended last.
    """
    font = font or load_builtin_font()
    if cfg.strategy is Strategy.CONTINUOUS:
        content, words, spans, overflow = _sliced_strategy(text, cfg, font, "proportional")
    elif cfg.strategy is Strategy.MONO:
        content, words, spans, overflow = _sliced_strategy(text, cfg, font, "mono")
    elif cfg.strategy is Strategy.WORDS:
        content, words, spans, overflow = _words_strategy(text, cfg, font)
    else:
        content, words, spans, overflow = _bigrams_strategy(text, cfg, font)

    cap = cfg.max_patches - 1
    truncated = len(content) > cap
    if truncated:
        content = content[:cap]
        spans = [s for s in spans if s.last < cap]
    patches = np.concatenate([content, eos_patch(cfg.patch_size)[None]], axis=0)
    patches.setflags(write=False)
    return PatchSequence(
        patches=patches,
        word_spans=tuple(spans),
        truncated=truncated,
        strategy=cfg.strategy,
        overflow_events=overflow,
        words=tuple(words),
    )
