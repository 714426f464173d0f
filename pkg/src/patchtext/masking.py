"""Span masking, sinusoidal positions, and patch target normalization.

Span sampling convention (the reference pipeline does not pin one down):
draw a span length uniform in [1, min(max_span, n)] and a start uniform in
[0, n - length], merge the draw with any *overlapping* accepted spans
(adjacent spans stay separate), reject the draw if the merged span would
exceed max_span, and repeat until at least ceil(ratio * n) content indices
are masked.  The ratio is enforced as a floor; the overshoot is at most
max_span - 1 indices.

Randomness comes from numpy's counter-based Philox generator keyed by
``SeedSequence(seed)``, so plans are reproducible across runs, platforms and
(with the draw order documented above) across reimplementations.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

EPSILON = 1e-6


def generator_from_seed(seed: int) -> np.random.Generator:
    """The package-wide RNG: Philox keyed by SeedSequence(seed)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@dataclass(frozen=True)
class MaskConfig:
    ratio: float = 0.25
    max_span: int = 6
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError("ratio must lie in [0, 1]")
        if self.max_span < 1:
            raise ValueError("max_span must be >= 1")


@dataclass(frozen=True)
class MaskPlan:
    """Sorted masked content indices grouped into disjoint spans.

    Only content patches are ever masked: indices live in [0, n) where n is
    the content patch count, so the EOS patch (index n) and the CLS slot are
    structurally unmaskable.
    """

    n: int
    masked: tuple[int, ...]
    spans: tuple[tuple[int, int], ...]    # (start, length), sorted, disjoint
    seed: int | None = None

    def __post_init__(self) -> None:
        covered = []
        prev_end = -1
        for start, length in self.spans:
            if length < 1 or start < 0 or start + length > self.n:
                raise ValueError(f"span ({start},{length}) outside [0,{self.n})")
            if start < prev_end:
                raise ValueError("spans overlap")
            prev_end = start + length
            covered.extend(range(start, start + length))
        if tuple(covered) != self.masked:
            raise ValueError("masked indices must equal the union of spans")

    def to_json(self) -> str:
        return json.dumps({"seed": self.seed, "n": self.n,
                           "spans": [list(s) for s in self.spans]})

    @classmethod
    def from_json(cls, text: str) -> "MaskPlan":
        blob = json.loads(text)
        spans = tuple((int(s), int(l)) for s, l in blob["spans"])
        masked = tuple(i for s, l in spans for i in range(s, s + l))
        return cls(n=int(blob["n"]), masked=masked, spans=spans, seed=blob.get("seed"))


def sample_span_mask(n: int, cfg: MaskConfig, rng: np.random.Generator | None = None) -> MaskPlan:
    """Sample a span mask over n content patches (see module docstring).

    Deterministic for a fixed cfg.seed when no generator is passed; passing
    ``rng`` draws from that stream instead (training uses one stream across
    steps).  Requires n >= 1.
    """
    if n < 1:
        raise ValueError("need at least one content patch to mask")
    seed = None if rng is not None else cfg.seed
    if rng is None:
        rng = generator_from_seed(cfg.seed)
    need = math.ceil(cfg.ratio * n)
    spans: list[tuple[int, int]] = []
    masked_count = 0
    max_len = min(cfg.max_span, n)
    while masked_count < need:
        length = int(rng.integers(1, max_len + 1))
        start = int(rng.integers(0, n - length + 1))
        lo, hi = start, start + length
        keep, merged_lo, merged_hi = [], lo, hi
        for s, l in spans:
            if s < hi and lo < s + l:             # strict overlap; adjacency stays split
                merged_lo = min(merged_lo, s)
                merged_hi = max(merged_hi, s + l)
            else:
                keep.append((s, l))
        if merged_hi - merged_lo > cfg.max_span:
            continue
        keep.append((merged_lo, merged_hi - merged_lo))
        keep.sort()
        spans = keep
        masked_count = sum(l for _, l in spans)
    masked = tuple(i for s, l in spans for i in range(s, s + l))
    return MaskPlan(n=n, masked=masked, spans=tuple(spans), seed=seed)


def sinusoidal_positions(n: int, d: int) -> np.ndarray:
    """Fixed sinusoidal position table: (p, 2i) = sin(p / 10000^(2i/d)),
    (p, 2i+1) = cos of the same angle.  Requires even d and n >= 1."""
    if d % 2 != 0:
        raise ValueError("embedding width must be even")
    if n < 1:
        raise ValueError("need at least one position")
    positions = np.arange(n, dtype=np.float64)[:, None]
    angles = positions / np.power(10000.0, 2.0 * np.arange(d // 2) / d)[None, :]
    table = np.empty((n, d), dtype=np.float64)
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)
    return table


def normalize_targets(patch: np.ndarray, epsilon: float = EPSILON,
                      dtype: np.dtype = np.float64) -> np.ndarray:
    """Per-patch standardized reconstruction target.

    Pixels are scaled to [0, 1], then shifted/scaled to zero mean and unit
    variance with the epsilon guard: (x - mean) / sqrt(var + epsilon).  A
    constant patch maps to the zero vector.
    """
    x = np.asarray(patch, dtype=np.float64).reshape(-1) / 255.0
    if x.size != 256:
        raise ValueError(f"expected 256 pixels, got {x.size}")
    mean = x.mean()
    var = x.var()
    return ((x - mean) / math.sqrt(var + epsilon)).astype(dtype)


def patch_moments(patch: np.ndarray) -> tuple[float, float]:
    """(mean, variance) of the [0,1]-scaled pixels; the normalization state."""
    x = np.asarray(patch, dtype=np.float64).reshape(-1) / 255.0
    return float(x.mean()), float(x.var())


def denormalize_targets(vec: np.ndarray, mean: float, var: float,
                        epsilon: float = EPSILON) -> np.ndarray:
    """Invert normalize_targets given the stored moments; returns [0,1] pixels."""
    return np.asarray(vec, dtype=np.float64) * math.sqrt(var + epsilon) + mean
