"""Shared fixtures and independent layout oracles used across the test suite.

The oracle helpers recompute layout arithmetic (ink widths, bigram cells,
blank-separator counts) directly from the font's glyph metrics, without going
through the rendering code under test.
"""

import math

import numpy as np
import pytest

from patchtext.fixtures import english_fixture
from patchtext.raster import FontAtlas, Glyph, grapheme_clusters, load_builtin_font


@pytest.fixture(scope="session")
def font() -> FontAtlas:
    return load_builtin_font()


@pytest.fixture(scope="session")
def corpus_10k() -> tuple[str, ...]:
    return english_fixture(10_000, seed=0)


@pytest.fixture(scope="session")
def corpus_5k(corpus_10k) -> tuple[str, ...]:
    return corpus_10k[:5_000]


# --------------------------------------------------------------------------
# Layout oracles (font metrics only; no calls into render internals)
# --------------------------------------------------------------------------

def advance(font: FontAtlas, cluster: str, mode: str = "proportional") -> int:
    glyph = font.lookup_cluster(cluster)
    return glyph.advance_mono if mode == "mono" else glyph.advance_proportional


def word_ink(font: FontAtlas, word: str) -> int:
    """Proportional ink width of a word: sum of advances minus the last 1px gap."""
    return sum(advance(font, c) for c in grapheme_clusters(word)) - 1


def bigram_cell_inks(font: FontAtlas, word: str) -> list[int]:
    """Ink width of each greedy grapheme-pair cell of a word."""
    clusters = grapheme_clusters(word)
    cells = [clusters[i : i + 2] for i in range(0, len(clusters), 2)]
    return [sum(advance(font, c) for c in cell) - 1 for cell in cells]


def bigram_blanks_after(font: FontAtlas, word: str,
                        min_whitespace: int = 3, patch: int = 16) -> int:
    """Blank separator patches required after a word under the bigram layout."""
    last_ink = min(bigram_cell_inks(font, word)[-1], patch)
    return math.ceil((last_ink + min_whitespace) / patch) - 1


def words_strategy_layout(font: FontAtlas, words: list[str],
                          min_whitespace: int = 3, patch: int = 16):
    """(x, ink) per word under the boundary-aligned strategy, plus total width."""
    positions = []
    x = 0
    for word in words:
        ink = word_ink(font, word)
        positions.append((x, ink))
        x = math.ceil((x + ink + min_whitespace) / patch) * patch
    total = positions[-1][0] + positions[-1][1] if positions else 0
    return positions, total


def box_glyph(codepoint: int | None, width: int) -> Glyph:
    """Synthetic tight glyph: a filled rectangle outline of the given width."""
    bitmap = np.zeros((16, width), dtype=np.uint8)
    bitmap[0, :] = 255
    bitmap[-1, :] = 255
    bitmap[:, 0] = 255
    bitmap[:, -1] = 255
    bitmap.setflags(write=False)
    return Glyph(codepoint, width, bitmap, width + 1)


def make_font(widths: dict[str, int]) -> FontAtlas:
    """A synthetic atlas of box glyphs (plus space and notdef) for layout tests."""
    space = Glyph(0x20, 0, np.zeros((16, 0), dtype=np.uint8), 3)
    glyphs = {0x20: space}
    for char, width in widths.items():
        glyphs[ord(char)] = box_glyph(ord(char), width)
    return FontAtlas(glyphs, box_glyph(None, 5), version="test-font")
