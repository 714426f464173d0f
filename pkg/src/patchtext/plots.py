"""Figure rendering for CLI reports.

Every figure is written as a PNG with the encoder's Software tag suppressed
and a fixed size/dpi, so identical inputs produce byte-identical files; the
bytes go through an atomic write like every other artifact.  The Agg backend
is forced before pyplot loads, keeping the package usable on headless boxes.
"""

from __future__ import annotations

import io
from typing import Iterable, Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import SimilarityDistribution
from .formats import atomic_write_bytes
from .stats import UniqueCurve

FIGSIZE = (7.0, 4.5)
DPI = 100


def save_figure(fig, path) -> None:
    """Serialize to PNG without volatile metadata, then write atomically."""
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=DPI, metadata={"Software": None})
    plt.close(fig)
    atomic_write_bytes(path, buf.getvalue())


def plot_unique_curves(curves: Mapping[str, UniqueCurve], path, *,
                       title: str = "Unique patches vs. sequences") -> None:
    """One growth curve per strategy on shared axes."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for label in sorted(curves):
        points = curves[label].points
        ax.plot([p.sequences for p in points], [p.unique_patches for p in points],
                marker="o", markersize=3, label=label)
    ax.set_xlabel("sequences")
    ax.set_ylabel("unique patches")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    save_figure(fig, path)


def plot_length_histogram(histogram: Mapping[int, int], path, *,
                          title: str = "Sequence lengths") -> None:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    lengths = sorted(histogram)
    ax.bar(lengths, [histogram[n] for n in lengths], width=1.0)
    ax.set_xlabel("patches per sequence")
    ax.set_ylabel("sequences")
    ax.set_title(title)
    fig.tight_layout()
    save_figure(fig, path)


def plot_patch_grid(patches: Sequence[tuple[np.ndarray, int]], path, *,
                    columns: int = 10, title: str = "Most frequent patches") -> None:
    """Tile ranked patches (ink shown dark on light) with their counts."""
    count = len(patches)
    if count == 0:
        raise ValueError("no patches to plot")
    columns = min(columns, count)
    rows = (count + columns - 1) // columns
    fig, axes = plt.subplots(rows, columns, figsize=(columns * 0.9, rows * 1.1), squeeze=False)
    for i in range(rows * columns):
        ax = axes[i // columns][i % columns]
        ax.set_axis_off()
        if i < count:
            patch, n = patches[i]
            ax.imshow(255 - patch, cmap="gray", vmin=0, vmax=255, interpolation="nearest")
            ax.set_title(str(n), fontsize=6)
    fig.suptitle(title)
    fig.tight_layout()
    save_figure(fig, path)


def plot_word_frequencies(ranked: Sequence[tuple[str, int]], path, *,
                          title: str = "Top words") -> None:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    words = [w for w, _ in ranked]
    counts = [c for _, c in ranked]
    ax.bar(range(len(words)), counts)
    ax.set_xticks(range(len(words)))
    ax.set_xticklabels(words, rotation=60, ha="right", fontsize=7)
    ax.set_ylabel("count")
    ax.set_title(title)
    fig.tight_layout()
    save_figure(fig, path)


def plot_distributions(distributions: Iterable[SimilarityDistribution], path, *,
                       title: str = "Cosine similarity by layer") -> None:
    """Median lines per label across layers, quartile bands shaded."""
    by_label: dict[str, list[SimilarityDistribution]] = {}
    for dist in distributions:
        by_label.setdefault(dist.label, []).append(dist)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for label in sorted(by_label):
        dists = sorted(by_label[label], key=lambda d: d.layer)
        layers = [d.layer for d in dists if d.values]
        if not layers:
            continue
        summaries = [d.summary() for d in dists if d.values]
        med = [s["median"] for s in summaries]
        q1 = [s["q1"] for s in summaries]
        q3 = [s["q3"] for s in summaries]
        ax.plot(layers, med, marker="o", markersize=3, label=label)
        ax.fill_between(layers, q1, q3, alpha=0.2)
    ax.set_xlabel("layer")
    ax.set_ylabel("cosine similarity")
    ax.set_ylim(-1.05, 1.05)
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    save_figure(fig, path)


def plot_loss(steps: Sequence[int], losses: Sequence[float], path, *,
              smoothed: Sequence[float] | None = None,
              title: str = "Training loss") -> None:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(steps, losses, linewidth=0.6, alpha=0.5, label="loss")
    if smoothed is not None:
        ax.plot(steps, smoothed, linewidth=1.5, label="smoothed")
    ax.set_xlabel("step")
    ax.set_ylabel("masked MSE")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    save_figure(fig, path)


def plot_layer_curve(values: Mapping[int, float], path, *,
                     ylabel: str = "Spearman rho",
                     title: str = "Score by layer") -> None:
    fig, ax = plt.subplots(figsize=FIGSIZE)
    layers = sorted(values)
    ax.plot(layers, [values[k] for k in layers], marker="o")
    ax.set_xlabel("layer")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    save_figure(fig, path)
