"""Embedding-geometry metrics over per-layer hidden states.

An ``EmbeddingDump`` stores, for each sentence and each encoder layer, the
full matrix of position vectors (row 0 is normally the CLS slot and the last
row the EOS slot, matching the encoder's layout), plus annotations: the word
spans inside each sentence, optional labeled word-in-context pairs, and
optional gold-scored sentence pairs.  All metrics here are pure functions of
a dump; none of them touch the model, so dumps written by one process can be
analyzed by another (or by external tooling via the PXEB file format).

Conventions shared by every metric:

* a word representation is the arithmetic mean of its span's position
  vectors (``pooled_word``);
* a sentence representation is the mean over all positions excluding the
  CLS and EOS slots (``sentence_rep``);
* cosine similarity is undefined for zero vectors and raises;
* pair enumeration is exhaustive and deterministic, so results can be
  checked against brute-force oracles;
* the random baseline is drawn once per call from a seeded Philox stream
  and reused across layers, so identical seeds give identical baselines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .masking import generator_from_seed
from .render import PatchSequence

DISTRIBUTION_LABELS = frozenset(
    {"similar", "different", "random", "high-high", "low-low", "high-low"}
)
PAIR_LABELS = frozenset({"similar", "different"})


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WordOccurrence:
    """One appearance of a word: a closed position span inside a sentence."""

    sentence: int
    word: str
    first: int
    last: int

    def __post_init__(self) -> None:
        if self.first < 0 or self.last < self.first:
            raise ValueError(f"invalid span [{self.first}, {self.last}]")

    @property
    def span(self) -> tuple[int, int]:
        return (self.first, self.last)


@dataclass(frozen=True)
class WicPair:
    """A target word in two contexts, labeled similar or different."""

    target: str
    label: str
    a: WordOccurrence
    b: WordOccurrence

    def __post_init__(self) -> None:
        if self.label not in PAIR_LABELS:
            raise ValueError(f"pair label must be one of {sorted(PAIR_LABELS)}, got {self.label!r}")


@dataclass(frozen=True)
class ScoredPair:
    """Two sentences with a gold similarity score."""

    sentence_a: int
    sentence_b: int
    gold: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.gold):
            raise ValueError("gold score must be finite")


@dataclass(frozen=True)
class SentenceInfo:
    """Annotation for one sentence: special slots plus its word spans."""

    cls_index: int
    eos_index: int
    words: tuple[WordOccurrence, ...] = ()
    text: str | None = None

    def __post_init__(self) -> None:
        if self.cls_index < 0 or self.eos_index < 0 or self.cls_index == self.eos_index:
            raise ValueError("cls and eos must be distinct non-negative positions")


@dataclass(frozen=True)
class SimilarityDistribution:
    """A labeled list of cosine values at one layer, with its median."""

    label: str
    layer: int
    values: tuple[float, ...]
    median: float

    def __post_init__(self) -> None:
        if self.label not in DISTRIBUTION_LABELS:
            raise ValueError(f"unknown distribution label {self.label!r}")
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.size and (arr.min() < -1.0 - 1e-9 or arr.max() > 1.0 + 1e-9):
            raise ValueError("cosine values must lie in [-1, 1]")
        expect = float(np.median(arr)) if arr.size else float("nan")
        same = (np.isnan(self.median) and np.isnan(expect)) or self.median == expect
        if not same:
            raise ValueError("median inconsistent with values")

    @classmethod
    def from_values(cls, label: str, layer: int, values: Iterable[float]) -> "SimilarityDistribution":
        vals = tuple(float(v) for v in values)
        med = float(np.median(np.asarray(vals))) if vals else float("nan")
        return cls(label=label, layer=layer, values=vals, median=med)

    def summary(self) -> dict:
        """Count, median, and quartiles (linear interpolation), NaN if empty."""
        if not self.values:
            q1 = q3 = float("nan")
        else:
            arr = np.asarray(self.values, dtype=np.float64)
            q1 = float(np.percentile(arr, 25.0))
            q3 = float(np.percentile(arr, 75.0))
        return {
            "label": self.label,
            "layer": self.layer,
            "count": len(self.values),
            "median": self.median,
            "q1": q1,
            "q3": q3,
        }


@dataclass(frozen=True)
class EmbeddingDump:
    """Per-sentence, per-layer position vectors plus annotations.

    ``states`` maps ``(sentence_id, layer)`` to a float matrix of shape
    ``(positions, width)``; every sentence must carry all layers
    ``0 .. layers-1`` with a consistent position count.  Word spans and the
    CLS/EOS indices are positions into those rows.
    """

    layers: int
    width: int
    states: Mapping[tuple[int, int], np.ndarray]
    sentences: Mapping[int, SentenceInfo]
    wic_pairs: tuple[WicPair, ...] = ()
    scored_pairs: tuple[ScoredPair, ...] = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.layers < 1 or self.width < 1:
            raise ValueError("layers and width must be positive")
        lengths: dict[int, int] = {}
        for (sid, layer), state in self.states.items():
            if sid not in self.sentences:
                raise ValueError(f"state references unknown sentence {sid}")
            if not 0 <= layer < self.layers:
                raise ValueError(f"layer {layer} outside 0..{self.layers - 1}")
            arr = np.asarray(state)
            if arr.ndim != 2 or arr.shape[1] != self.width or arr.shape[0] < 2:
                raise ValueError(f"state ({sid}, {layer}) must be (positions >= 2, {self.width})")
            prev = lengths.setdefault(sid, arr.shape[0])
            if prev != arr.shape[0]:
                raise ValueError(f"sentence {sid} has inconsistent position counts across layers")
        for sid, info in self.sentences.items():
            if sid not in lengths:
                raise ValueError(f"sentence {sid} has no states")
            for layer in range(self.layers):
                if (sid, layer) not in self.states:
                    raise ValueError(f"sentence {sid} is missing layer {layer}")
            n = lengths[sid]
            if info.cls_index >= n or info.eos_index >= n:
                raise ValueError(f"sentence {sid}: special indices outside {n} positions")
            for occ in info.words:
                self._check_occurrence(occ, expect_sentence=sid)
        for pair in self.wic_pairs:
            self._check_occurrence(pair.a)
            self._check_occurrence(pair.b)
        for pair in self.scored_pairs:
            for sid in (pair.sentence_a, pair.sentence_b):
                if sid not in self.sentences:
                    raise ValueError(f"scored pair references unknown sentence {sid}")

    def _check_occurrence(self, occ: WordOccurrence, expect_sentence: int | None = None) -> None:
        if expect_sentence is not None and occ.sentence != expect_sentence:
            raise ValueError(f"occurrence {occ} listed under sentence {expect_sentence}")
        info = self.sentences.get(occ.sentence)
        if info is None:
            raise ValueError(f"occurrence references unknown sentence {occ.sentence}")
        n = self.positions(occ.sentence)
        if occ.last >= n:
            raise ValueError(f"occurrence {occ} outside {n} positions")
        if occ.first <= info.cls_index <= occ.last or occ.first <= info.eos_index <= occ.last:
            raise ValueError(f"occurrence {occ} overlaps a CLS/EOS slot")

    def positions(self, sentence: int) -> int:
        return int(np.asarray(self.states[(sentence, 0)]).shape[0])

    def state(self, sentence: int, layer: int) -> np.ndarray:
        try:
            return np.asarray(self.states[(sentence, layer)], dtype=np.float64)
        except KeyError:
            raise KeyError(f"no state for sentence {sentence}, layer {layer}") from None

    def occurrences(self) -> tuple[WordOccurrence, ...]:
        """All word occurrences, ordered by sentence id then span position."""
        out: list[WordOccurrence] = []
        for sid in sorted(self.sentences):
            out.extend(self.sentences[sid].words)
        return tuple(out)


def sentence_info_from_sequence(seq: PatchSequence, sentence: int = 0) -> SentenceInfo:
    """Annotation for a rendered sequence under the encoder's state layout.

    The encoder prepends a CLS slot, so patch ``i`` lands at state row
    ``i + 1`` and the EOS patch at the final row.  Word strings must be
    present on the sequence (``render`` keeps them; the patch-dump file
    format does not).  ``sentence`` is the id the occurrences will carry.
    """
    if seq.words is None:
        raise ValueError("sequence carries no word strings; render it with words attached")
    words = tuple(
        WordOccurrence(sentence=sentence, word=seq.words[span.word_index],
                       first=span.first + 1, last=span.last + 1)
        for span in seq.word_spans
    )
    return SentenceInfo(cls_index=0, eos_index=seq.eos_index + 1, words=words)


def _renumber(info: SentenceInfo, sid: int) -> SentenceInfo:
    words = tuple(
        WordOccurrence(sentence=sid, word=o.word, first=o.first, last=o.last)
        for o in info.words
    )
    return SentenceInfo(cls_index=info.cls_index, eos_index=info.eos_index,
                        words=words, text=info.text)


def build_dump(layer_states: Mapping[int, Sequence[np.ndarray]],
               infos: Mapping[int, SentenceInfo],
               *,
               wic_pairs: Iterable[WicPair] = (),
               scored_pairs: Iterable[ScoredPair] = (),
               metadata: dict | None = None) -> EmbeddingDump:
    """Assemble a dump from per-sentence layer stacks.

    ``layer_states[sid]`` is the list of per-layer matrices for one sentence
    (as returned by the encoder, layer 0 first).  Sentence ids in ``infos``
    are renumbered onto the word occurrences so callers can pass annotations
    built per-sentence without knowing their final ids.
    """
    if not layer_states:
        raise ValueError("no sentences")
    counts = {len(stack) for stack in layer_states.values()}
    if len(counts) != 1:
        raise ValueError("sentences disagree on layer count")
    layers = counts.pop()
    widths = {np.asarray(stack[0]).shape[1] for stack in layer_states.values()}
    if len(widths) != 1:
        raise ValueError("sentences disagree on width")
    states = {
        (sid, layer): np.asarray(stack[layer], dtype=np.float32)
        for sid, stack in layer_states.items()
        for layer in range(layers)
    }
    sentences = {sid: _renumber(infos[sid], sid) for sid in layer_states}
    return EmbeddingDump(layers=layers, width=widths.pop(), states=states,
                         sentences=sentences, wic_pairs=tuple(wic_pairs),
                         scored_pairs=tuple(scored_pairs),
                         metadata=dict(metadata or {}))


# --------------------------------------------------------------------------
# Core vector operations
# --------------------------------------------------------------------------

def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity in [-1, 1]; zero vectors have no direction and raise."""
    a = np.asarray(u, dtype=np.float64).reshape(-1)
    b = np.asarray(v, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"width mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine of a zero vector is undefined")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def pooled_word(dump: EmbeddingDump, sentence: int,
                word_span: WordOccurrence | tuple[int, int], layer: int) -> np.ndarray:
    """Mean of the span's position vectors at one layer."""
    first, last = word_span.span if isinstance(word_span, WordOccurrence) else word_span
    state = dump.state(sentence, layer)
    if not 0 <= first <= last < state.shape[0]:
        raise ValueError(f"span [{first}, {last}] outside sentence of {state.shape[0]} positions")
    return state[first:last + 1].mean(axis=0)


def sentence_rep(dump: EmbeddingDump, sentence: int, layer: int) -> np.ndarray:
    """Mean over all positions excluding the CLS and EOS slots."""
    info = dump.sentences[sentence]
    state = dump.state(sentence, layer)
    keep = [i for i in range(state.shape[0]) if i not in (info.cls_index, info.eos_index)]
    if not keep:
        raise ValueError(f"sentence {sentence} has no positions besides CLS/EOS")
    return state[keep].mean(axis=0)


def _pooled_occurrence(dump: EmbeddingDump, occ: WordOccurrence, layer: int) -> np.ndarray:
    return pooled_word(dump, occ.sentence, occ.span, layer)


# --------------------------------------------------------------------------
# Distribution metrics
# --------------------------------------------------------------------------

def random_occurrence_pairs(dump: EmbeddingDump, count: int,
                            seed: int = 0) -> tuple[tuple[WordOccurrence, WordOccurrence], ...]:
    """Seeded sample of ``count`` distinct occurrence pairs, uniform over pairs.

    Draw order is fixed: for each pair, one Philox draw picks the first
    occurrence among all ``m``, a second picks the partner among the
    remaining ``m - 1`` (indices at or past the first shift up by one).
    Returns an empty tuple when fewer than two occurrences exist.
    """
    occs = dump.occurrences()
    m = len(occs)
    if m < 2 or count <= 0:
        return ()
    rng = generator_from_seed(seed)
    pairs = []
    for _ in range(count):
        i = int(rng.integers(0, m))
        j = int(rng.integers(0, m - 1))
        if j >= i:
            j += 1
        pairs.append((occs[i], occs[j]))
    return tuple(pairs)


def wic_distributions(dump: EmbeddingDump, *, random_pairs: int = 1000,
                      seed: int = 0) -> dict[int, dict[str, SimilarityDistribution]]:
    """Per-layer cosine distributions for labeled pairs plus a random baseline.

    For every labeled pair the target word is pooled in each of its two
    contexts and the cosine between the pooled vectors lands in the pair's
    bucket.  The baseline pairs random word occurrences across the whole
    dump; they are sampled once (seeded) and reused at every layer, and the
    mean of the baseline doubles as a global anisotropy estimate.
    """
    baseline = random_occurrence_pairs(dump, random_pairs, seed)
    out: dict[int, dict[str, SimilarityDistribution]] = {}
    for layer in range(dump.layers):
        buckets: dict[str, list[float]] = {"similar": [], "different": [], "random": []}
        for pair in dump.wic_pairs:
            value = cosine(_pooled_occurrence(dump, pair.a, layer),
                           _pooled_occurrence(dump, pair.b, layer))
            buckets[pair.label].append(value)
        for a, b in baseline:
            buckets["random"].append(cosine(_pooled_occurrence(dump, a, layer),
                                            _pooled_occurrence(dump, b, layer)))
        out[layer] = {
            label: SimilarityDistribution.from_values(label, layer, values)
            for label, values in buckets.items()
        }
    return out


def self_similarity(dump: EmbeddingDump, word: str, layer: int) -> float:
    """Mean pairwise cosine over all unordered occurrence pairs of a word."""
    occs = [o for o in dump.occurrences() if o.word == word]
    if len({o.sentence for o in occs}) < 2:
        raise ValueError(f"word {word!r} must occur in at least two sentences")
    pooled = [_pooled_occurrence(dump, o, layer) for o in occs]
    values = [cosine(a, b) for a, b in combinations(pooled, 2)]
    return float(np.mean(values))


def intra_sentence_similarity(dump: EmbeddingDump, occurrence: WordOccurrence,
                              layer: int) -> float:
    """Cosine between one occurrence's pooled vector and its sentence's rep."""
    word_vec = _pooled_occurrence(dump, occurrence, layer)
    sent_vec = sentence_rep(dump, occurrence.sentence, layer)
    return cosine(word_vec, sent_vec)


def frequency_bucket_distributions(dump: EmbeddingDump, high: Iterable[str],
                                   low: Iterable[str],
                                   layer: int) -> dict[str, SimilarityDistribution]:
    """Cosine distributions within and across two word buckets.

    Pairs are enumerated at the occurrence level: within a bucket, every
    unordered pair of distinct occurrences counts (repeats of the same word
    included, the occurrence paired with itself never).  Across buckets each
    unordered occurrence pair counts once even when the buckets overlap.
    """
    high_set = frozenset(high)
    low_set = frozenset(low)
    if not high_set or not low_set:
        raise ValueError("both word sets must be nonempty")
    occs = dump.occurrences()
    high_idx = [i for i, o in enumerate(occs) if o.word in high_set]
    low_idx = [i for i, o in enumerate(occs) if o.word in low_set]
    cache: dict[int, np.ndarray] = {}

    def vec(i: int) -> np.ndarray:
        if i not in cache:
            cache[i] = _pooled_occurrence(dump, occs[i], layer)
        return cache[i]

    cross = sorted({(min(i, j), max(i, j)) for i in high_idx for j in low_idx if i != j})
    pair_sets = {
        "high-high": list(combinations(high_idx, 2)),
        "low-low": list(combinations(low_idx, 2)),
        "high-low": cross,
    }
    return {
        label: SimilarityDistribution.from_values(
            label, layer, [cosine(vec(i), vec(j)) for i, j in pairs])
        for label, pairs in pair_sets.items()
    }


# --------------------------------------------------------------------------
# Rank correlation
# --------------------------------------------------------------------------

def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.size, dtype=np.float64)
    i = 0
    while i < arr.size:
        j = i
        while j + 1 < arr.size and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_rho(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation: Pearson over average ranks.

    Ties receive average ranks.  A constant input has no ranking and raises.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be equal-length 1-D sequences")
    if x.size < 2:
        raise ValueError("need at least two observations")
    rx = average_ranks(x)
    ry = average_ranks(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    sx = float(np.sqrt(np.dot(dx, dx)))
    sy = float(np.sqrt(np.dot(dy, dy)))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("rank correlation of a constant sequence is undefined")
    return float(np.clip(np.dot(dx, dy) / (sx * sy), -1.0, 1.0))


def sts_layer_curve(dump: EmbeddingDump) -> dict[int, float]:
    """Per-layer Spearman rho between sentence-pair cosines and gold scores."""
    if not dump.scored_pairs:
        raise ValueError("dump carries no gold-scored sentence pairs")
    gold = [pair.gold for pair in dump.scored_pairs]
    out: dict[int, float] = {}
    for layer in range(dump.layers):
        sims = [
            cosine(sentence_rep(dump, pair.sentence_a, layer),
                   sentence_rep(dump, pair.sentence_b, layer))
            for pair in dump.scored_pairs
        ]
        out[layer] = spearman_rho(sims, gold)
    return out


# --------------------------------------------------------------------------
# Dump persistence (PXEB + JSON sidecar)
# --------------------------------------------------------------------------

def _occurrence_blob(occ: WordOccurrence) -> list:
    return [occ.sentence, occ.word, occ.first, occ.last]


def _occurrence_from_blob(blob: Sequence) -> WordOccurrence:
    sid, word, first, last = blob
    return WordOccurrence(sentence=int(sid), word=str(word), first=int(first), last=int(last))


def save_dump(path: str | Path, dump: EmbeddingDump) -> None:
    """Write the vectors as a PXEB file and the annotations as a sidecar."""
    from . import __version__
    from .formats import write_embedding_items, write_json_sidecar

    items = []
    for sid in sorted(dump.sentences):
        for layer in range(dump.layers):
            state = np.asarray(dump.states[(sid, layer)], dtype=np.float32)
            for position in range(state.shape[0]):
                items.append((sid, layer, position, state[position]))
    write_embedding_items(path, dump.layers, dump.width, items)
    sidecar = {
        "toolkit_version": __version__,
        "metadata": dump.metadata,
        "sentences": {
            str(sid): {
                "cls_index": info.cls_index,
                "eos_index": info.eos_index,
                "text": info.text,
                "words": [_occurrence_blob(o) for o in info.words],
            }
            for sid, info in sorted(dump.sentences.items())
        },
        "wic_pairs": [
            {"target": p.target, "label": p.label,
             "a": _occurrence_blob(p.a), "b": _occurrence_blob(p.b)}
            for p in dump.wic_pairs
        ],
        "scored_pairs": [
            [p.sentence_a, p.sentence_b, p.gold] for p in dump.scored_pairs
        ],
    }
    write_json_sidecar(path, sidecar)


def load_dump(path: str | Path) -> EmbeddingDump:
    """Inverse of :func:`save_dump`."""
    from .formats import read_embedding_items

    layers, width, items = read_embedding_items(path)
    rows: dict[tuple[int, int], dict[int, np.ndarray]] = {}
    for sid, layer, position, vec in items:
        rows.setdefault((sid, layer), {})[position] = vec
    states: dict[tuple[int, int], np.ndarray] = {}
    for key, by_pos in rows.items():
        n = len(by_pos)
        if sorted(by_pos) != list(range(n)):
            raise ValueError(f"{path}: state {key} has non-contiguous positions")
        states[key] = np.stack([by_pos[i] for i in range(n)])
    sidecar = Path(str(path) + ".json")
    blob = json.loads(sidecar.read_text(encoding="utf-8"))
    sentences = {
        int(sid): SentenceInfo(
            cls_index=int(entry["cls_index"]),
            eos_index=int(entry["eos_index"]),
            words=tuple(_occurrence_from_blob(b) for b in entry["words"]),
            text=entry.get("text"),
        )
        for sid, entry in blob["sentences"].items()
    }
    wic_pairs = tuple(
        WicPair(target=e["target"], label=e["label"],
                a=_occurrence_from_blob(e["a"]), b=_occurrence_from_blob(e["b"]))
        for e in blob.get("wic_pairs", [])
    )
    scored_pairs = tuple(
        ScoredPair(sentence_a=int(a), sentence_b=int(b), gold=float(g))
        for a, b, g in blob.get("scored_pairs", [])
    )
    return EmbeddingDump(layers=layers, width=width, states=states,
                         sentences=sentences, wic_pairs=wic_pairs,
                         scored_pairs=scored_pairs,
                         metadata=blob.get("metadata", {}))
