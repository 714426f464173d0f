"""Deterministic pseudo-English corpora for tests, benchmarks, and demos.

Lines are built from a fixed 300-word vocabulary under a Zipf-like rank
distribution, so the output looks like English prose to the renderer (word
lengths, punctuation, capitalization) without shipping any real text.  The
rank-1 word "the" carries twice the rank-2 weight; even after sentence-case
splits part of its mass into "The", the lowercase form stays the most
frequent token under case-sensitive counting.

Every line is generated from its own Philox stream keyed by ``(seed, line
index)``, so ``english_fixture(n, seed)`` is a prefix of
``english_fixture(m, seed)`` whenever ``n <= m`` and any line can be
regenerated independently.
"""

from __future__ import annotations

import numpy as np

# Rough descending-frequency order; all lowercase, strictly alphabetic, so
# the tokenizer in `stats` recovers every word after stripping punctuation.
VOCABULARY: tuple[str, ...] = (
    "the", "of", "and", "to", "a", "in", "that", "it", "is", "was",
    "he", "for", "on", "are", "as", "with", "his", "they", "at", "be",
    "this", "have", "from", "or", "one", "had", "by", "word", "but", "not",
    "what", "all", "were", "we", "when", "your", "can", "said", "there", "use",
    "an", "each", "which", "she", "do", "how", "their", "if", "will", "up",
    "other", "about", "out", "many", "then", "them", "these", "so", "some", "her",
    "would", "make", "like", "him", "into", "time", "has", "look", "two", "more",
    "write", "go", "see", "number", "no", "way", "could", "people", "my", "than",
    "first", "water", "been", "call", "who", "oil", "its", "now", "find", "long",
    "down", "day", "did", "get", "come", "made", "may", "part", "over", "new",
    "sound", "take", "only", "little", "work", "know", "place", "year", "live", "me",
    "back", "give", "most", "very", "after", "thing", "our", "just", "name", "good",
    "sentence", "man", "think", "say", "great", "where", "help", "through", "much", "before",
    "line", "right", "too", "mean", "old", "any", "same", "tell", "boy", "follow",
    "came", "want", "show", "also", "around", "form", "three", "small", "set", "put",
    "end", "does", "another", "well", "large", "must", "big", "even", "such", "because",
    "turn", "here", "why", "ask", "went", "men", "read", "need", "land", "different",
    "home", "us", "move", "try", "kind", "hand", "picture", "again", "change", "off",
    "play", "spell", "air", "away", "animal", "house", "point", "page", "letter", "mother",
    "answer", "found", "study", "still", "learn", "should", "music", "world", "high", "every",
    "near", "add", "food", "between", "own", "below", "country", "plant", "last", "school",
    "father", "keep", "tree", "never", "start", "city", "earth", "eye", "light", "thought",
    "head", "under", "story", "saw", "left", "few", "while", "along", "might", "close",
    "something", "seem", "next", "hard", "open", "example", "begin", "life", "always", "those",
    "both", "paper", "together", "got", "group", "often", "run", "important", "until", "children",
    "side", "feet", "car", "mile", "night", "walk", "white", "sea", "began", "grow",
    "took", "river", "four", "carry", "state", "once", "book", "hear", "stop", "without",
    "second", "later", "miss", "idea", "enough", "eat", "face", "watch", "far", "really",
    "almost", "let", "above", "girl", "sometimes", "mountain", "cut", "young", "talk", "soon",
    "list", "song", "being", "leave", "family", "body", "feel", "horse", "bird", "told",
)

ZIPF_EXPONENT = 1.05
MIN_WORDS = 5
MAX_WORDS = 15
COMMA_PROBABILITY = 0.12
TERMINALS: tuple[str, ...] = (".", "?", "!")
TERMINAL_WEIGHTS: tuple[float, ...] = (0.8, 0.1, 0.1)


def _rank_weights() -> np.ndarray:
    ranks = np.arange(1, len(VOCABULARY) + 1, dtype=np.float64)
    weights = 1.0 / (ranks + 2.0) ** ZIPF_EXPONENT
    weights[0] = 2.0 * weights[1]
    return weights / weights.sum()

_WEIGHTS = _rank_weights()


def _line_generator(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, index))))


def fixture_line(index: int, seed: int = 0) -> str:
    """The ``index``-th sentence of the seeded corpus, independent of length."""
    rng = _line_generator(seed, index)
    n_words = int(rng.integers(MIN_WORDS, MAX_WORDS + 1))
    picks = rng.choice(len(VOCABULARY), size=n_words, p=_WEIGHTS)
    commas = rng.random(n_words) < COMMA_PROBABILITY
    terminal = TERMINALS[int(rng.choice(len(TERMINALS), p=TERMINAL_WEIGHTS))]
    parts = []
    for i, pick in enumerate(picks):
        word = VOCABULARY[int(pick)]
        if i == 0:
            word = word[0].upper() + word[1:]
        if i < n_words - 1 and commas[i]:
            word += ","
        parts.append(word)
    return " ".join(parts) + terminal


def english_fixture(n_lines: int, seed: int = 0) -> tuple[str, ...]:
    """``n_lines`` deterministic sentences; a prefix of any longer fixture."""
    if n_lines < 0:
        raise ValueError("n_lines must be non-negative")
    return tuple(fixture_line(i, seed) for i in range(n_lines))


def write_fixture(path, n_lines: int, seed: int = 0) -> None:
    """Write the fixture as UTF-8 text, one sentence per line, LF endings."""
    from .formats import atomic_write_text

    atomic_write_text(path, "\n".join(english_fixture(n_lines, seed)) + "\n")
