"""Streaming corpus statistics over rendered patch sequences.

The accumulator keys patches by their exact 256 bytes (no hashing tricks, no
probabilistic counting), so unique counts are exact.  Memory is bounded by
the number of distinct patches: the dict stores one 256-byte key per distinct
patch, i.e. roughly 300 bytes x unique patches; desk-scale corpora (<= 1e6
sequences) stay well under a few hundred MB even under CONTINUOUS rendering,
and structured strategies are far smaller.  Python interns the key objects
inside the dict itself: repeated patches never store a second copy.

Word frequency tables tokenize by Unicode whitespace, strip leading/trailing
punctuation (category P*), reject tokens containing any numeric character
(category N*), and are case-sensitive.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .raster import FontAtlas, load_builtin_font
from .render import PatchSequence, RenderConfig, render


@dataclass
class PatchAccumulator:
    """Exact patch-occurrence counts: bytes(key) -> count."""

    patch_size: int = 16
    counts: dict[bytes, int] = field(default_factory=dict)
    total_patches: int = 0
    sequences_seen: int = 0

    @property
    def unique_patches(self) -> int:
        return len(self.counts)

    def merge(self, other: "PatchAccumulator") -> "PatchAccumulator":
        """Fold another accumulator in; equals sequential ingestion."""
        if other.patch_size != self.patch_size:
            raise ValueError("patch size mismatch")
        for key, count in other.counts.items():
            self.counts[key] = self.counts.get(key, 0) + count
        self.total_patches += other.total_patches
        self.sequences_seen += other.sequences_seen
        return self


def ingest(acc: PatchAccumulator, seq: PatchSequence) -> PatchAccumulator:
    """Count every patch of the sequence (blanks and EOS included) by bytes."""
    if seq.patches.shape[1] != acc.patch_size:
        raise ValueError("sequence patch size does not match accumulator")
    counts = acc.counts
    for patch in seq.patches:
        key = patch.tobytes()
        counts[key] = counts.get(key, 0) + 1
    acc.total_patches += len(seq.patches)
    acc.sequences_seen += 1
    return acc


@dataclass(frozen=True)
class CurvePoint:
    sequences: int
    unique_patches: int
    total_patches: int


@dataclass(frozen=True)
class UniqueCurve:
    """Unique-patch growth curve; ``exhausted_at`` marks a corpus that ended
    before the last requested checkpoint (the curve then ends at corpus end)."""

    points: tuple[CurvePoint, ...]
    exhausted_at: int | None = None

    def __post_init__(self) -> None:
        for prev, cur in zip(self.points, self.points[1:]):
            if cur.unique_patches < prev.unique_patches or cur.total_patches < prev.total_patches:
                raise ValueError("curve must be non-decreasing")
            if cur.sequences <= prev.sequences:
                raise ValueError("curve checkpoints must increase")


def _rendered(corpus: Iterable[str], cfg: RenderConfig, font: FontAtlas | None) -> Iterator[PatchSequence]:
    font = font or load_builtin_font()
    for line in corpus:
        yield render(line.rstrip("\r\n"), cfg, font)


def unique_curve(corpus: Iterable[str], cfg: RenderConfig,
                 checkpoints: list[int], font: FontAtlas | None = None,
                 sequences: Iterable[PatchSequence] | None = None) -> UniqueCurve:
    """Render + ingest the corpus in order, emitting a point per checkpoint.

    ``sequences`` bypasses rendering when the caller already has patch
    sequences (pre-rendered shards); corpus is ignored then.  Checkpoints must
    be strictly increasing and >= 1.
    """
    if not checkpoints or any(b <= a for a, b in zip(checkpoints, checkpoints[1:])):
        raise ValueError("checkpoints must be strictly increasing")
    if checkpoints[0] < 1:
        raise ValueError("checkpoints start at 1")
    acc = PatchAccumulator(patch_size=cfg.patch_size)
    points: list[CurvePoint] = []
    pending = list(checkpoints)
    stream = sequences if sequences is not None else _rendered(corpus, cfg, font)
    for seq in stream:
        ingest(acc, seq)
        if pending and acc.sequences_seen == pending[0]:
            points.append(CurvePoint(acc.sequences_seen, acc.unique_patches, acc.total_patches))
            pending.pop(0)
        if not pending:
            break
    exhausted_at = None
    if pending:
        exhausted_at = acc.sequences_seen
        if acc.sequences_seen and (not points or points[-1].sequences != acc.sequences_seen):
            points.append(CurvePoint(acc.sequences_seen, acc.unique_patches, acc.total_patches))
    return UniqueCurve(points=tuple(points), exhausted_at=exhausted_at)


def top_k(acc: PatchAccumulator, k: int) -> list[tuple[bytes, int]]:
    """The k most frequent patches, count descending, ties broken by the
    lexicographic order of the raw patch bytes.  k beyond the unique count
    returns everything."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(acc.counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def length_histogram(corpus: Iterable[str], cfg: RenderConfig,
                     font: FontAtlas | None = None,
                     sequences: Iterable[PatchSequence] | None = None) -> dict[int, int]:
    """Histogram of sequence lengths in patches (EOS included)."""
    hist: dict[int, int] = {}
    stream = sequences if sequences is not None else _rendered(corpus, cfg, font)
    for seq in stream:
        n = len(seq)
        hist[n] = hist.get(n, 0) + 1
    return hist


def _clean_token(token: str) -> str | None:
    chars = list(token)
    while chars and unicodedata.category(chars[0]).startswith("P"):
        chars.pop(0)
    while chars and unicodedata.category(chars[-1]).startswith("P"):
        chars.pop()
    if not chars:
        return None
    if any(unicodedata.category(c).startswith("N") for c in chars):
        return None
    return "".join(chars)


def word_frequencies(lines: Iterable[str]) -> dict[str, int]:
    """Case-sensitive word counts (see module docstring for the token rule)."""
    table: dict[str, int] = {}
    for line in lines:
        for token in line.split():
            word = _clean_token(token)
            if word is not None:
                table[word] = table.get(word, 0) + 1
    return table


@dataclass(frozen=True)
class FrequencyBuckets:
    high: tuple[str, ...]
    low: tuple[str, ...]
    complete: bool          # False when the table could not fill both buckets


def frequency_buckets(table: dict[str, int], high_k: int = 100,
                      low_target: int = 1000, low_k: int = 100) -> FrequencyBuckets:
    """High-frequency and near-target-frequency word buckets.

    high = the high_k most frequent words; low = the low_k words whose counts
    are nearest low_target.  All ties break lexicographically so the buckets
    are deterministic.  A small table returns fewer words with
    ``complete=False``; the buckets may overlap on such tables.
    """
    if not table:
        raise ValueError("word table is empty")
    if high_k < 1 or low_k < 1 or low_target < 1:
        raise ValueError("bucket parameters must be >= 1")
    by_count = sorted(table.items(), key=lambda kv: (-kv[1], kv[0]))
    high = tuple(w for w, _ in by_count[:high_k])
    by_distance = sorted(table.items(), key=lambda kv: (abs(kv[1] - low_target), kv[0]))
    low = tuple(w for w, _ in by_distance[:low_k])
    return FrequencyBuckets(high=high, low=low,
                            complete=len(high) == high_k and len(low) == low_k)
