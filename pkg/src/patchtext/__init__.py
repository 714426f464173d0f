"""patchtext: pixel-patch text pipelines for tokenization-free language models.

The package renders text into sequences of 16x16 grayscale patches under four
strategies (continuous, bigrams, mono, words), gathers corpus statistics over
those patches, drives a desk-scale masked patch autoencoder, and measures the
geometry of the learned embeddings.
"""

__version__ = "0.1.0"

from .raster import FontAtlas, Glyph, LineImage, load_builtin_font, measure_text, raster_line
from .render import PatchSequence, RenderConfig, Strategy, render, segment_word_bigrams, word_patch_spans
from .masking import MaskConfig, MaskPlan, normalize_targets, sample_span_mask, sinusoidal_positions
from .stats import PatchAccumulator, UniqueCurve, frequency_buckets, ingest, length_histogram, top_k, unique_curve, word_frequencies
from .model import ModelConfig, PatchAutoencoder, TrainRecord, encode_layers, forward_loss, grad_check, init_params, train_steps
from .analysis import (
    EmbeddingDump,
    SimilarityDistribution,
    WordOccurrence,
    cosine,
    frequency_bucket_distributions,
    intra_sentence_similarity,
    pooled_word,
    self_similarity,
    sentence_rep,
    spearman_rho,
    sts_layer_curve,
    wic_distributions,
)

__all__ = [
    "FontAtlas", "Glyph", "LineImage", "load_builtin_font", "measure_text", "raster_line",
    "PatchSequence", "RenderConfig", "Strategy", "render", "segment_word_bigrams", "word_patch_spans",
    "MaskConfig", "MaskPlan", "normalize_targets", "sample_span_mask", "sinusoidal_positions",
    "PatchAccumulator", "UniqueCurve", "frequency_buckets", "ingest", "length_histogram",
    "top_k", "unique_curve", "word_frequencies",
    "ModelConfig", "PatchAutoencoder", "TrainRecord", "encode_layers", "forward_loss",
    "grad_check", "init_params", "train_steps",
    "EmbeddingDump", "SimilarityDistribution", "WordOccurrence", "cosine",
    "frequency_bucket_distributions", "intra_sentence_similarity", "pooled_word",
    "self_similarity", "sentence_rep", "spearman_rho", "sts_layer_curve", "wic_distributions",
    "__version__",
]
