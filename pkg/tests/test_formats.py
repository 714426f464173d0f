"""Binary artifact formats: patch dumps, checkpoints, embeddings, PGM images."""

import json

import numpy as np
import pytest

from patchtext.formats import (
    atomic_write_bytes,
    dump_patch_sequences,
    read_checkpoint,
    read_embedding_items,
    read_patch_dump,
    read_pgm,
    write_checkpoint,
    write_embedding_items,
    write_json_sidecar,
    write_patch_dump,
    write_pgm,
)
from patchtext.render import RenderConfig, Strategy, render


# --------------------------------------------------------------------------
# PXPD patch dumps
# --------------------------------------------------------------------------

def test_patch_dump_round_trip(tmp_path, font):
    cfg = RenderConfig(strategy=Strategy.BIGRAMS)
    sequences = [render(t, cfg, font) for t in ["ab cd", "", "growing small again."]]
    path = tmp_path / "dump.pxpd"
    write_patch_dump(path, sequences, cfg, corpus_path="corpus.txt")

    loaded, header = read_patch_dump(path)
    assert header["strategy"] is Strategy.BIGRAMS
    assert header["sequences"] == 3
    assert header["patch_size"] == 16
    for original, back in zip(sequences, loaded):
        assert np.array_equal(back.patches, original.patches)
        assert back.word_spans == original.word_spans
        assert back.truncated == original.truncated
        assert back.strategy is original.strategy
        assert back.words is None, "the dump format stores span indices, not strings"


def test_patch_dump_keeps_truncation_flag(tmp_path, font):
    cfg = RenderConfig(strategy=Strategy.CONTINUOUS, max_patches=4)
    seq = render(" ".join(["wide"] * 30), cfg, font)
    assert seq.truncated
    path = tmp_path / "trunc.pxpd"
    write_patch_dump(path, [seq], cfg)
    loaded, _ = read_patch_dump(path)
    assert loaded[0].truncated


def test_patch_dump_sidecar_is_json_with_config(tmp_path, font):
    cfg = RenderConfig(strategy=Strategy.MONO, max_patches=100, min_whitespace=4)
    path = tmp_path / "dump.pxpd"
    write_patch_dump(path, [render("abc", cfg, font)], cfg, corpus_path="in.txt")
    sidecar = json.loads((tmp_path / "dump.pxpd.json").read_text())
    assert sidecar["format"] == "PXPD"
    assert sidecar["config"] == {"strategy": "mono", "patch_size": 16,
                                 "max_patches": 100, "min_whitespace": 4}
    assert sidecar["corpus_path"] == "in.txt"
    assert sidecar["sequences"] == 1
    assert sidecar["font_version"] == "builtin-v1"
    assert "255" in sidecar["ink_convention"]


def test_patch_dump_bytes_are_deterministic(font):
    cfg = RenderConfig(strategy=Strategy.WORDS)
    sequences = [render("one two", cfg, font)]
    assert dump_patch_sequences(sequences, cfg) == dump_patch_sequences(sequences, cfg)


def test_patch_dump_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bogus.pxpd"
    path.write_bytes(b"NOPE" + b"\0" * 32)
    with pytest.raises(ValueError):
        read_patch_dump(path)


# --------------------------------------------------------------------------
# PXCK checkpoints
# --------------------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    config = {"model": {"hidden": 32}, "note": "x", "nested": {"a": [1, 2]}}
    tensors = {
        "weight": np.arange(12, dtype=np.float32).reshape(3, 4),
        "bias": np.array([1.5, -2.0], dtype=np.float64),
        "scalar": np.float32(7.25),
    }
    path = tmp_path / "model.pxck"
    write_checkpoint(path, config, tensors)
    config_back, tensors_back = read_checkpoint(path)
    assert config_back == config
    assert set(tensors_back) == set(tensors)
    assert np.array_equal(tensors_back["weight"], tensors["weight"])
    assert np.array_equal(tensors_back["bias"],
                          tensors["bias"].astype(np.float32))
    assert tensors_back["scalar"].shape == ()
    assert float(tensors_back["scalar"]) == 7.25


def test_checkpoint_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bogus.pxck"
    path.write_bytes(b"NOPE" + b"\0" * 16)
    with pytest.raises(ValueError):
        read_checkpoint(path)


# --------------------------------------------------------------------------
# PXEB embedding dumps
# --------------------------------------------------------------------------

def test_embedding_items_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    items = [(sid, layer, pos, rng.normal(size=8).astype(np.float32))
             for sid in (0, 1) for layer in (0, 1, 2) for pos in range(4)]
    path = tmp_path / "embed.pxeb"
    write_embedding_items(path, 3, 8, items)
    layers, width, back = read_embedding_items(path)
    assert (layers, width) == (3, 8)
    assert len(back) == len(items)
    for (sid, layer, pos, vec), (bsid, blayer, bpos, bvec) in zip(items, back):
        assert (sid, layer, pos) == (bsid, blayer, bpos)
        assert np.array_equal(vec, bvec)


def test_embedding_items_validate_width(tmp_path):
    with pytest.raises(ValueError):
        write_embedding_items(tmp_path / "bad.pxeb", 1, 8,
                              [(0, 0, 0, np.zeros(4, dtype=np.float32))])


def test_embedding_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bogus.pxeb"
    path.write_bytes(b"PXPD" + b"\0" * 24)
    with pytest.raises(ValueError):
        read_embedding_items(path)


# --------------------------------------------------------------------------
# PGM images
# --------------------------------------------------------------------------

def test_pgm_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    patch = rng.integers(0, 256, size=(16, 16)).astype(np.uint8)
    path = tmp_path / "patch.pgm"
    write_pgm(path, patch)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n16 16\n255\n")
    assert np.array_equal(read_pgm(path), patch)


def test_pgm_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bogus.pgm"
    path.write_bytes(b"P6\n2 2\n255\n" + b"\0" * 12)
    with pytest.raises(ValueError):
        read_pgm(path)


# --------------------------------------------------------------------------
# Atomic writes and sidecars
# --------------------------------------------------------------------------

def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "out.bin"
    for payload in (b"first", b"second longer payload"):
        atomic_write_bytes(target, payload)
        assert target.read_bytes() == payload
        assert sorted(p.name for p in tmp_path.iterdir()) == ["out.bin"]


def test_json_sidecar_is_sorted_and_newline_terminated(tmp_path):
    sidecar = write_json_sidecar(tmp_path / "artifact.bin", {"b": 1, "a": {"z": 2, "y": 3}})
    assert sidecar == tmp_path / "artifact.bin.json"
    text = sidecar.read_text()
    assert text.endswith("\n")
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"b": 1, "a": {"z": 2, "y": 3}}
