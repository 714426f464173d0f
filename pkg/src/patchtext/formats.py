"""Binary file formats: patch dumps (PXPD), checkpoints (PXCK), embedding
dumps (PXEB), and PGM patch images.

All integers are little-endian.  Layouts:

PXPD  magic "PXPD", version u8, patch_size u8, strategy code u8,
      sequence count u64; per sequence: patch count u32, truncated u8,
      raw patches (count x 256 bytes, row-major), span count u32,
      spans as (word_index, first_patch, last_patch) u32 triples.
      Strategy codes: continuous=0, bigrams=1, mono=2, words=3.
      A JSON sidecar (written next to the dump) records the render config,
      font version, corpus path and the ink convention.

PXCK  magic "PXCK", config JSON (u32 length prefix, UTF-8), then named
      tensors: name length u32, name bytes, rank u32, dims u32 each,
      values f32.

PXEB  magic "PXEB", version u32, layer count u32, width u32,
      item count u64; per item: sentence_id u32, layer u16, position u16,
      width x f32.  Annotations (word spans, CLS/EOS indices, pair labels,
      gold scores) live in a JSON sidecar.

PGM   binary P5, 16x16, maxval 255.

Writers stage output in a temp file and rename on success so failed runs
never leave partial files behind.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .render import PatchSequence, RenderConfig, Strategy, WordSpan

FORMAT_VERSION = 1
STRATEGY_CODES = {Strategy.CONTINUOUS: 0, Strategy.BIGRAMS: 1, Strategy.MONO: 2, Strategy.WORDS: 3}
CODE_TO_STRATEGY = {v: k for k, v in STRATEGY_CODES.items()}
INK_CONVENTION = "0=background (white page), 255=ink (black); EOS patch is all-255"


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via temp-file-and-rename; no partial files on failure."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json_sidecar(path: str | Path, blob: dict) -> Path:
    """Deterministic JSON (sorted keys) at <path>.json."""
    sidecar = Path(str(path) + ".json")
    atomic_write_text(sidecar, json.dumps(blob, indent=2, sort_keys=True) + "\n")
    return sidecar


# --------------------------------------------------------------------------
# PXPD patch dumps
# --------------------------------------------------------------------------

def dump_patch_sequences(sequences: Sequence[PatchSequence], cfg: RenderConfig) -> bytes:
    out = bytearray()
    out += struct.pack("<4sBBBQ", b"PXPD", FORMAT_VERSION, cfg.patch_size,
                       STRATEGY_CODES[cfg.strategy], len(sequences))
    for seq in sequences:
        out += struct.pack("<IB", len(seq.patches), int(seq.truncated))
        out += seq.patches.tobytes()
        out += struct.pack("<I", len(seq.word_spans))
        for span in seq.word_spans:
            out += struct.pack("<III", span.word_index, span.first, span.last)
    return bytes(out)


def write_patch_dump(path: str | Path, sequences: Sequence[PatchSequence],
                     cfg: RenderConfig, corpus_path: str | None = None,
                     font_version: str = "builtin-v1") -> None:
    atomic_write_bytes(path, dump_patch_sequences(sequences, cfg))
    write_json_sidecar(path, {
        "format": "PXPD",
        "version": FORMAT_VERSION,
        "config": {
            "strategy": cfg.strategy.value,
            "patch_size": cfg.patch_size,
            "max_patches": cfg.max_patches,
            "min_whitespace": cfg.min_whitespace,
        },
        "strategy_codes": {s.value: c for s, c in STRATEGY_CODES.items()},
        "font_version": font_version,
        "corpus_path": corpus_path,
        "ink_convention": INK_CONVENTION,
        "sequences": len(sequences),
    })


def read_patch_dump(path: str | Path) -> tuple[list[PatchSequence], dict]:
    """Parse a PXPD file.  Word strings are not stored in the dump, so the
    returned sequences carry span triples but ``words=None``."""
    blob = Path(path).read_bytes()
    magic, version, patch_size, code, count = struct.unpack_from("<4sBBBQ", blob, 0)
    if magic != b"PXPD":
        raise ValueError(f"{path}: not a PXPD file")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    strategy = CODE_TO_STRATEGY[code]
    offset = struct.calcsize("<4sBBBQ")
    sequences = []
    patch_bytes = patch_size * patch_size
    for _ in range(count):
        n, truncated = struct.unpack_from("<IB", blob, offset)
        offset += 5
        patches = np.frombuffer(blob, dtype=np.uint8, count=n * patch_bytes,
                                offset=offset).reshape(n, patch_size, patch_size).copy()
        offset += n * patch_bytes
        (n_spans,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        spans = []
        for _ in range(n_spans):
            w, first, last = struct.unpack_from("<III", blob, offset)
            offset += 12
            spans.append(WordSpan(w, first, last))
        patches.setflags(write=False)
        sequences.append(PatchSequence(patches=patches, word_spans=tuple(spans),
                                       truncated=bool(truncated), strategy=strategy))
    header = {"version": version, "patch_size": patch_size, "strategy": strategy,
              "sequences": count}
    return sequences, header


# --------------------------------------------------------------------------
# PXCK checkpoints
# --------------------------------------------------------------------------

def dump_checkpoint(config: dict, tensors: dict[str, np.ndarray]) -> bytes:
    payload = json.dumps(config, sort_keys=True).encode("utf-8")
    out = bytearray(b"PXCK")
    out += struct.pack("<I", len(payload))
    out += payload
    for name, tensor in tensors.items():
        data = np.asarray(tensor, dtype="<f4", order="C")
        encoded = name.encode("utf-8")
        out += struct.pack("<I", len(encoded))
        out += encoded
        out += struct.pack("<I", data.ndim)
        out += struct.pack(f"<{data.ndim}I", *data.shape)
        out += data.tobytes()
    return bytes(out)


def write_checkpoint(path: str | Path, config: dict, tensors: dict[str, np.ndarray]) -> None:
    atomic_write_bytes(path, dump_checkpoint(config, tensors))


def read_checkpoint(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    blob = Path(path).read_bytes()
    if blob[:4] != b"PXCK":
        raise ValueError(f"{path}: not a PXCK file")
    (config_len,) = struct.unpack_from("<I", blob, 4)
    offset = 8
    config = json.loads(blob[offset : offset + config_len].decode("utf-8"))
    offset += config_len
    tensors: dict[str, np.ndarray] = {}
    while offset < len(blob):
        (name_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        dims = struct.unpack_from(f"<{rank}I", blob, offset)
        offset += 4 * rank
        size = int(np.prod(dims)) if rank else 1
        tensors[name] = np.frombuffer(blob, dtype="<f4", count=size,
                                      offset=offset).reshape(dims).copy()
        offset += 4 * size
    return config, tensors


# --------------------------------------------------------------------------
# PXEB embedding dumps
# --------------------------------------------------------------------------

def dump_embedding_items(layers: int, width: int,
                         items: Iterable[tuple[int, int, int, np.ndarray]]) -> bytes:
    body = bytearray()
    count = 0
    for sentence_id, layer, position, vec in items:
        data = np.ascontiguousarray(vec, dtype="<f4")
        if data.shape != (width,):
            raise ValueError(f"vector width {data.shape} != ({width},)")
        body += struct.pack("<IHH", sentence_id, layer, position)
        body += data.tobytes()
        count += 1
    head = struct.pack("<4sIIIQ", b"PXEB", FORMAT_VERSION, layers, width, count)
    return head + bytes(body)


def write_embedding_items(path: str | Path, layers: int, width: int,
                          items: Iterable[tuple[int, int, int, np.ndarray]]) -> None:
    atomic_write_bytes(path, dump_embedding_items(layers, width, items))


def read_embedding_items(path: str | Path) -> tuple[int, int, list[tuple[int, int, int, np.ndarray]]]:
    blob = Path(path).read_bytes()
    magic, version, layers, width, count = struct.unpack_from("<4sIIIQ", blob, 0)
    if magic != b"PXEB":
        raise ValueError(f"{path}: not a PXEB file")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    offset = struct.calcsize("<4sIIIQ")
    items = []
    for _ in range(count):
        sid, layer, position = struct.unpack_from("<IHH", blob, offset)
        offset += 8
        vec = np.frombuffer(blob, dtype="<f4", count=width, offset=offset).copy()
        offset += 4 * width
        items.append((sid, layer, position, vec))
    return layers, width, items


# --------------------------------------------------------------------------
# PGM patch images
# --------------------------------------------------------------------------

def dump_pgm(patch: np.ndarray) -> bytes:
    patch = np.asarray(patch, dtype=np.uint8)
    h, w = patch.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + patch.tobytes()


def write_pgm(path: str | Path, patch: np.ndarray) -> None:
    atomic_write_bytes(path, dump_pgm(patch))


def read_pgm(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    header, _, rest = blob.partition(b"255\n")
    fields = header.split()
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h = int(fields[1]), int(fields[2])
    return np.frombuffer(rest, dtype=np.uint8, count=w * h).reshape(h, w).copy()
