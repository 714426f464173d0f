"""Streaming patch statistics and word frequency tables."""

import numpy as np
import pytest

from patchtext.render import RenderConfig, Strategy, render
from patchtext.stats import (
    CurvePoint,
    PatchAccumulator,
    UniqueCurve,
    frequency_buckets,
    ingest,
    length_histogram,
    top_k,
    unique_curve,
    word_frequencies,
)

BIGRAMS = RenderConfig(strategy=Strategy.BIGRAMS)


# --------------------------------------------------------------------------
# Accumulator
# --------------------------------------------------------------------------

def test_ingest_counts_unique_patches_across_lines(font):
    acc = PatchAccumulator()
    ingest(acc, render("ab ab", BIGRAMS, font))
    ingest(acc, render("ab cd", BIGRAMS, font))
    # Distinct patches: the 'ab' cell, the 'cd' cell, and the EOS patch.
    assert acc.unique_patches == 3
    assert acc.total_patches == 6
    assert acc.sequences_seen == 2


def test_ingest_counts_every_occurrence(font):
    acc = PatchAccumulator()
    seq = render("ab ab ab", BIGRAMS, font)
    ingest(acc, seq)
    key = seq.patches[0].tobytes()
    assert acc.counts[key] == 3


def test_merge_equals_sequential_ingestion(font, corpus_10k):
    lines = corpus_10k[:40]
    whole = PatchAccumulator()
    left, right = PatchAccumulator(), PatchAccumulator()
    for i, line in enumerate(lines):
        seq = render(line, BIGRAMS, font)
        ingest(whole, seq)
        ingest(left if i % 2 == 0 else right, seq)
    left.merge(right)
    assert left.counts == whole.counts
    assert left.total_patches == whole.total_patches
    assert left.sequences_seen == whole.sequences_seen


def test_merge_rejects_patch_size_mismatch():
    with pytest.raises(ValueError):
        PatchAccumulator(patch_size=16).merge(PatchAccumulator(patch_size=8))


# --------------------------------------------------------------------------
# Unique-patch growth curve
# --------------------------------------------------------------------------

def test_unique_curve_emits_requested_checkpoints(font, corpus_10k):
    curve = unique_curve(corpus_10k[:30], BIGRAMS, [5, 10, 30], font=font)
    assert [p.sequences for p in curve.points] == [5, 10, 30]
    assert curve.exhausted_at is None
    uniques = [p.unique_patches for p in curve.points]
    totals = [p.total_patches for p in curve.points]
    assert uniques == sorted(uniques)
    assert totals == sorted(totals)


def test_unique_curve_marks_exhausted_corpus(font, corpus_10k):
    curve = unique_curve(corpus_10k[:7], BIGRAMS, [5, 100], font=font)
    assert curve.exhausted_at == 7
    assert [p.sequences for p in curve.points] == [5, 7]


def test_unique_curve_accepts_prerendered_sequences(font, corpus_10k):
    lines = corpus_10k[:12]
    via_corpus = unique_curve(lines, BIGRAMS, [4, 12], font=font)
    sequences = [render(line, BIGRAMS, font) for line in lines]
    via_sequences = unique_curve((), BIGRAMS, [4, 12], sequences=iter(sequences))
    assert via_corpus == via_sequences


def test_unique_curve_validates_checkpoints(font):
    with pytest.raises(ValueError):
        unique_curve(["a"], BIGRAMS, [], font=font)
    with pytest.raises(ValueError):
        unique_curve(["a"], BIGRAMS, [3, 2], font=font)
    with pytest.raises(ValueError):
        unique_curve(["a"], BIGRAMS, [0, 2], font=font)


def test_unique_curve_type_rejects_decreasing_points():
    with pytest.raises(ValueError):
        UniqueCurve(points=(CurvePoint(1, 5, 5), CurvePoint(2, 4, 9)))
    with pytest.raises(ValueError):
        UniqueCurve(points=(CurvePoint(2, 5, 5), CurvePoint(2, 6, 9)))


# --------------------------------------------------------------------------
# Top-k patches
# --------------------------------------------------------------------------

def test_top_k_orders_by_count_then_bytes():
    acc = PatchAccumulator()
    acc.counts = {b"b" * 256: 2, b"a" * 256: 2, b"c" * 256: 5}
    assert top_k(acc, 3) == [(b"c" * 256, 5), (b"a" * 256, 2), (b"b" * 256, 2)]
    assert top_k(acc, 99) == top_k(acc, 3)
    assert top_k(acc, 1) == [(b"c" * 256, 5)]
    with pytest.raises(ValueError):
        top_k(acc, 0)


# --------------------------------------------------------------------------
# Length histogram
# --------------------------------------------------------------------------

def test_length_histogram_counts_eos(font):
    # 'growing' -> 4 bigram cells + EOS; an empty line is EOS alone.
    hist = length_histogram(["growing", "", "growing"], BIGRAMS, font=font)
    assert hist == {5: 2, 1: 1}


# --------------------------------------------------------------------------
# Word frequencies
# --------------------------------------------------------------------------

def test_word_frequencies_strips_punctuation_and_keeps_case():
    lines = ['The cat, the "cat" and 3 cats.']
    assert word_frequencies(lines) == {
        "The": 1, "cat": 2, "the": 1, "and": 1, "cats": 1,
    }


def test_word_frequencies_keeps_interior_punctuation():
    table = word_frequencies(["don't re-use don't"])
    assert table == {"don't": 2, "re-use": 1}


def test_word_frequencies_rejects_tokens_with_digits():
    assert word_frequencies(["a1b c 2nd"]) == {"c": 1}


# --------------------------------------------------------------------------
# Frequency buckets
# --------------------------------------------------------------------------

def test_frequency_buckets_orders_and_breaks_ties():
    table = {"the": 100, "cat": 3, "dog": 5, "a": 100, "b": 7, "fox": 1}
    buckets = frequency_buckets(table, high_k=2, low_target=5, low_k=2)
    assert buckets.high == ("a", "the")
    assert buckets.low == ("dog", "b")
    assert buckets.complete


def test_frequency_buckets_flags_incomplete_tables():
    buckets = frequency_buckets({"one": 4}, high_k=2, low_target=5, low_k=2)
    assert buckets.high == ("one",)
    assert buckets.low == ("one",)
    assert not buckets.complete


def test_frequency_buckets_validation():
    with pytest.raises(ValueError):
        frequency_buckets({}, high_k=1, low_target=1, low_k=1)
    with pytest.raises(ValueError):
        frequency_buckets({"a": 1}, high_k=0, low_target=1, low_k=1)


def test_frequency_buckets_low_distance_tie_favors_lexicographic():
    # |3-5| == |7-5|: 'ant' (3) and 'bee' (7) tie; lexicographic keeps order.
    table = {"ant": 3, "bee": 7, "cow": 5}
    buckets = frequency_buckets(table, high_k=1, low_target=5, low_k=2)
    assert buckets.low == ("cow", "ant")
