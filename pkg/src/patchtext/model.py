"""Desk-scale masked patch autoencoder.

Architecture: a linear patch projection (256 -> hidden), a learned CLS token,
a pre-norm transformer encoder that sees only CLS + unmasked patches (plus
fixed sinusoidal positions), a linear projection into the decoder width,
learned mask tokens re-inserted at the masked positions, a pre-norm decoder,
and a linear head predicting 256 pixel values per patch.  The loss is mean
squared error over the masked patches only, against per-patch-normalized
pixels by default (raw [0,1] pixels otherwise).

Scale presets (enc-dec layers, hidden, mlp, heads):

    base  12-8 / 768 / 3072 / 12      small 12-4 / 384 / 1536 / 6
    tiny  12-2 / 192 /  768 /  3      desk   2-1 /  32 /   64 / 2

``desk`` is this package's addition for laptop-speed runs and tests.  The
decoder reuses ``hidden`` as its width by default, with MLP width scaled by
the encoder's mlp/hidden ratio and the same head count.

Encoder-only parameter count (what the scale table's size column reports)
has the closed form

    (256*h + h) + h + L * (4*h^2 + 2*h*mlp + 9*h + mlp) + 2*h

for patch projection + CLS + L blocks (qkv, attn proj, 2-layer MLP, two
layernorms) + the final layernorm; `encoder_parameter_count` counts the
instantiated tensors instead of trusting the formula.

Determinism: initialization draws from a dedicated torch.Generator, training
is single-threaded (train_steps pins torch to one thread), and all data-side
randomness flows from numpy Philox streams, so fixed seeds give bit-identical
trajectories.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import torch
from torch import nn

from .masking import EPSILON, MaskConfig, MaskPlan, generator_from_seed, normalize_targets, sample_span_mask, sinusoidal_positions
from .raster import FontAtlas
from .render import PatchSequence, RenderConfig, render

logger = logging.getLogger(__name__)

PRESETS: dict[str, tuple[int, int, int, int, int]] = {
    "base": (12, 8, 768, 3072, 12),
    "small": (12, 4, 384, 1536, 6),
    "tiny": (12, 2, 192, 768, 3),
    "desk": (2, 1, 32, 64, 2),
}


@dataclass(frozen=True)
class ModelConfig:
    enc_layers: int = 2
    dec_layers: int = 1
    hidden: int = 32
    mlp: int = 64
    heads: int = 2
    decoder_hidden: int | None = None
    patch_dim: int = 256

    def __post_init__(self) -> None:
        if self.hidden % self.heads != 0:
            raise ValueError("hidden must be divisible by heads")
        if self.dec_width % self.heads != 0:
            raise ValueError("decoder width must be divisible by heads")
        if min(self.enc_layers, self.dec_layers) < 0:
            raise ValueError("layer counts must be >= 0")
        if self.patch_dim != 256:
            raise ValueError("patch_dim is fixed at 256 (16x16 pixels)")

    @property
    def dec_width(self) -> int:
        return self.hidden if self.decoder_hidden is None else self.decoder_hidden

    @property
    def dec_mlp(self) -> int:
        return max(1, self.dec_width * self.mlp // self.hidden)

    @classmethod
    def preset(cls, name: str) -> "ModelConfig":
        try:
            enc, dec, hidden, mlp, heads = PRESETS[name.lower()]
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
        return cls(enc_layers=enc, dec_layers=dec, hidden=hidden, mlp=mlp, heads=heads)

    def to_dict(self) -> dict:
        return {"enc_layers": self.enc_layers, "dec_layers": self.dec_layers,
                "hidden": self.hidden, "mlp": self.mlp, "heads": self.heads,
                "decoder_hidden": self.decoder_hidden, "patch_dim": self.patch_dim}


@dataclass(frozen=True)
class TrainRecord:
    step: int
    loss: float
    masked_patches: int
    strategy: str

    def __post_init__(self) -> None:
        if self.loss < 0:
            raise ValueError("loss must be >= 0")


class Attention(nn.Module):
    def __init__(self, dim: int, heads: int) -> None:
        super().__init__()
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        n, dim = x.shape
        qkv = self.qkv(x).reshape(n, 3, self.heads, dim // self.heads)
        q, k, v = qkv.permute(1, 2, 0, 3)          # (heads, n, head_dim) each
        attn = torch.softmax((q @ k.transpose(-2, -1)) * self.scale, dim=-1)
        out = (attn @ v).transpose(0, 1).reshape(n, dim)
        return self.proj(out)


class Block(nn.Module):
    """Pre-norm transformer block with GELU MLP."""

    def __init__(self, dim: int, mlp_dim: int, heads: int) -> None:
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = Attention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, mlp_dim), nn.GELU(), nn.Linear(mlp_dim, dim))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


_POSITION_CACHE: dict[tuple[int, int], torch.Tensor] = {}


def _positions(n: int, d: int) -> torch.Tensor:
    key = (n, d)
    if key not in _POSITION_CACHE:
        _POSITION_CACHE[key] = torch.from_numpy(sinusoidal_positions(n, d))
    return _POSITION_CACHE[key]


class PatchAutoencoder(nn.Module):
    """See the module docstring for the architecture contract."""

    def __init__(self, cfg: ModelConfig) -> None:
        super().__init__()
        self.cfg = cfg
        h, dh = cfg.hidden, cfg.dec_width
        self.patch_proj = nn.Linear(cfg.patch_dim, h)
        self.cls_token = nn.Parameter(torch.zeros(h))
        self.enc_blocks = nn.ModuleList(Block(h, cfg.mlp, cfg.heads) for _ in range(cfg.enc_layers))
        self.enc_norm = nn.LayerNorm(h)
        self.enc_to_dec = nn.Linear(h, dh)
        self.mask_token = nn.Parameter(torch.zeros(dh))
        self.dec_blocks = nn.ModuleList(Block(dh, cfg.dec_mlp, cfg.heads) for _ in range(cfg.dec_layers))
        self.dec_norm = nn.LayerNorm(dh)
        self.head = nn.Linear(dh, cfg.patch_dim)

    @property
    def dtype(self) -> torch.dtype:
        return self.patch_proj.weight.dtype

    def _pixels(self, seq: PatchSequence) -> torch.Tensor:
        flat = seq.patches.reshape(len(seq.patches), -1).astype(np.float64) / 255.0
        return torch.from_numpy(flat).to(self.dtype)

    def _embed(self, seq: PatchSequence) -> torch.Tensor:
        """CLS + all patch tokens with positions added; layer-0 states."""
        tokens = self.patch_proj(self._pixels(seq))
        pos = _positions(len(seq.patches) + 1, self.cfg.hidden).to(self.dtype)
        cls = self.cls_token + pos[0]
        return torch.cat([cls[None, :], tokens + pos[1:]], dim=0)

    def _decoder_states(self, seq: PatchSequence, plan: MaskPlan) -> torch.Tensor:
        """Encoder over CLS + unmasked patches, mask tokens re-inserted, then
        the decoder stack; returns pre-head states for CLS + every patch."""
        n = len(seq.patches)
        content = n - 1
        if plan.n != content:
            raise ValueError(f"plan covers {plan.n} content patches, sequence has {content}")
        if not plan.masked:
            raise ValueError("empty mask plan: the loss is defined over masked patches only")
        tokens = self.patch_proj(self._pixels(seq))
        pos = _positions(n + 1, self.cfg.hidden).to(self.dtype)
        masked = np.asarray(plan.masked, dtype=np.int64)
        visible = np.setdiff1d(np.arange(n, dtype=np.int64), masked)  # EOS stays visible
        cls = self.cls_token + pos[0]
        x = torch.cat([cls[None, :], tokens[visible] + pos[visible + 1]], dim=0)
        for block in self.enc_blocks:
            x = block(x)
        x = self.enc_norm(x)

        y = self.enc_to_dec(x)
        dh = self.cfg.dec_width
        mask_rows = self.mask_token.to(y.dtype).expand(len(masked), dh)
        stacked = torch.cat([y, mask_rows], dim=0)      # rows for: CLS, visible..., masked...
        slots = np.concatenate([[0], visible + 1, masked + 1])
        inverse = np.argsort(slots)                     # slots is a permutation of 0..n
        full = stacked[torch.from_numpy(inverse)]
        full = full + _positions(n + 1, dh).to(self.dtype)
        for block in self.dec_blocks:
            full = block(full)
        return self.dec_norm(full)

    def predict_masked(self, seq: PatchSequence, plan: MaskPlan) -> torch.Tensor:
        """Pixel predictions (len(masked), 256) for the masked patches."""
        states = self._decoder_states(seq, plan)
        masked = torch.from_numpy(np.asarray(plan.masked, dtype=np.int64))
        return self.head(states[masked + 1])

    def encode_states(self, seq: PatchSequence) -> list[np.ndarray]:
        """Unmasked per-layer hidden states, layers 0..enc_layers.

        Layer 0 is the input layer (patch embeddings + positions, CLS at
        position 0); layer i the output of encoder block i; the final entry
        passes the encoder's closing layernorm (the encoder output).
        """
        with torch.no_grad():
            x = self._embed(seq)
            states = [x]
            for block in self.enc_blocks:
                x = block(x)
                states.append(x)
            if self.enc_blocks:
                states[-1] = self.enc_norm(states[-1])
        out = [s.detach().cpu().numpy().astype(np.float32) for s in states]
        return out


def init_params(cfg: ModelConfig, seed: int = 0) -> PatchAutoencoder:
    """Instantiate a model with the documented deterministic scheme:
    N(0, 0.02^2) for matrices and the CLS/mask tokens, zeros for biases,
    ones/zeros for layernorm scales/shifts."""
    model = PatchAutoencoder(cfg)
    gen = torch.Generator().manual_seed(int(seed) & 0x7FFF_FFFF_FFFF_FFFF)
    with torch.no_grad():
        for name, p in model.named_parameters():
            if name in ("cls_token", "mask_token") or p.ndim >= 2:
                p.normal_(0.0, 0.02, generator=gen)
            elif name.endswith(".weight"):
                p.fill_(1.0)        # layernorm scale
            else:
                p.zero_()           # biases and layernorm shifts
    return model


def encoder_parameter_count(model: PatchAutoencoder) -> int:
    """Encoder-side parameters by instantiation: patch projection, CLS,
    encoder blocks, final encoder norm (decoder stack excluded)."""
    parts = [model.patch_proj, model.enc_blocks, model.enc_norm]
    total = sum(p.numel() for part in parts for p in part.parameters())
    return total + model.cls_token.numel()


def reconstruction_targets(patches: np.ndarray, masked: Sequence[int], *,
                           normalize: bool = True, epsilon: float = EPSILON,
                           dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Targets read pixel data at the masked indices only."""
    np_dtype = np.float64
    rows = [normalize_targets(patches[i], epsilon, np_dtype) if normalize
            else patches[i].reshape(-1).astype(np_dtype) / 255.0
            for i in masked]
    return torch.from_numpy(np.stack(rows)).to(dtype)


def masked_loss(predictions: torch.Tensor, patches: np.ndarray, masked: Sequence[int], *,
                normalize: bool = True, epsilon: float = EPSILON) -> torch.Tensor:
    """MSE over the masked patches' pixels only.

    The scope is structural: targets are assembled exclusively from
    ``patches[i]`` for i in ``masked``, so pixels of unmasked patches cannot
    contribute a loss term (exactly, not approximately).
    """
    targets = reconstruction_targets(patches, masked, normalize=normalize,
                                     epsilon=epsilon, dtype=predictions.dtype)
    return ((predictions - targets) ** 2).mean()


def forward_loss(model: PatchAutoencoder, seq: PatchSequence, plan: MaskPlan, *,
                 normalize: bool = True) -> tuple[torch.Tensor, np.ndarray]:
    """Full training objective: (scalar loss, predictions for masked patches).

    Raises ValueError on an empty mask plan (the loss is undefined) or a plan
    whose content count disagrees with the sequence.
    """
    predictions = model.predict_masked(seq, plan)
    loss = masked_loss(predictions, seq.patches, plan.masked, normalize=normalize)
    return loss, predictions.detach().cpu().numpy()


def grad_check(model: PatchAutoencoder, seq: PatchSequence, plan: MaskPlan, *,
               step: float = 1e-5, samples: int = 200, seed: int = 0,
               normalize: bool = True) -> float:
    """Max relative error between analytic and central-difference gradients.

    Runs on a double-precision copy; samples >= `samples` random parameter
    coordinates (Philox-seeded).  Relative error uses the larger gradient
    magnitude with a 1e-6 floor so near-zero coordinates compare absolutely.
    """
    m = copy.deepcopy(model).double()
    loss, _ = forward_loss(m, seq, plan, normalize=normalize)
    m.zero_grad(set_to_none=True)
    loss.backward()
    params = [(name, p) for name, p in m.named_parameters()]
    sizes = np.array([p.numel() for _, p in params])
    offsets = np.cumsum(sizes)
    rng = generator_from_seed(seed)
    draws = rng.integers(0, int(offsets[-1]), size=samples)

    def loss_value() -> float:
        with torch.no_grad():
            val, _ = forward_loss(m, seq, plan, normalize=normalize)
        return float(val)

    worst = 0.0
    for flat in draws:
        pi = int(np.searchsorted(offsets, flat, side="right"))
        local = int(flat - (offsets[pi - 1] if pi else 0))
        _, p = params[pi]
        analytic = float(p.grad.reshape(-1)[local])
        view = p.data.view(-1)
        original = float(view[local])
        view[local] = original + step
        plus = loss_value()
        view[local] = original - step
        minus = loss_value()
        view[local] = original
        fd = (plus - minus) / (2.0 * step)
        rel = abs(fd - analytic) / max(abs(fd), abs(analytic), 1e-6)
        worst = max(worst, rel)
    return worst


def smoothed_losses(records: Sequence[TrainRecord], window: int = 100) -> np.ndarray:
    """Trailing-mean loss curve: entry i averages the last `window` losses
    up to and including step i (fewer near the start).  The final entry is
    the conventional "smoothed final loss" of a run."""
    if window < 1:
        raise ValueError("window must be >= 1")
    losses = np.array([r.loss for r in records], dtype=np.float64)
    sums = np.cumsum(losses)
    out = np.empty_like(losses)
    for i in range(len(losses)):
        lo = max(0, i - window + 1)
        out[i] = (sums[i] - (sums[lo - 1] if lo else 0.0)) / (i - lo + 1)
    return out


def save_checkpoint(path, model: PatchAutoencoder, extra: dict | None = None) -> None:
    from . import __version__
    from .formats import write_checkpoint

    config = {"model": model.cfg.to_dict(), "toolkit_version": __version__}
    if extra:
        config.update(extra)
    tensors = {name: value.detach().cpu().numpy() for name, value in model.state_dict().items()}
    write_checkpoint(path, config, tensors)


def load_checkpoint(path) -> tuple[PatchAutoencoder, dict]:
    from .formats import read_checkpoint

    config, tensors = read_checkpoint(path)
    cfg = ModelConfig(**config["model"])
    model = PatchAutoencoder(cfg)
    state = {name: torch.from_numpy(value) for name, value in tensors.items()}
    model.load_state_dict(state, strict=True)
    return model, config


def train_steps(corpus: Iterable[str], model: PatchAutoencoder, render_cfg: RenderConfig,
                mask_cfg: MaskConfig, steps: int, *, lr: float = 1e-3,
                betas: tuple[float, float] = (0.9, 0.999), seed: int = 0,
                normalize: bool = True, font: FontAtlas | None = None,
                checkpoint_path=None, checkpoint_every: int | None = None,
                on_record: Callable[[TrainRecord], None] | None = None) -> list[TrainRecord]:
    """Adam training loop over uniformly sampled corpus lines, one record per
    step.  Lines rendering to zero content patches are skipped up front with a
    counted warning.  Deterministic for fixed seeds: data order and masks come
    from two Philox streams spawned from `seed`, and torch is pinned to a
    single thread for the duration.
    """
    lines = [line.rstrip("\r\n") for line in corpus]
    if not lines:
        raise ValueError("corpus is empty")
    rendered = [render(line, render_cfg, font) for line in lines]
    eligible = [seq for seq in rendered if len(seq) > 1]
    skipped = len(rendered) - len(eligible)
    if skipped:
        logger.warning("skipped %d corpus lines rendering to 0 content patches", skipped)
    if not eligible:
        raise ValueError("every corpus line rendered to 0 content patches")

    torch.set_num_threads(1)
    order_seq, mask_seq = np.random.SeedSequence(seed).spawn(2)
    order_rng = np.random.Generator(np.random.Philox(order_seq))
    mask_rng = np.random.Generator(np.random.Philox(mask_seq))
    optimizer = torch.optim.Adam(model.parameters(), lr=lr, betas=betas)

    records: list[TrainRecord] = []
    for step_idx in range(1, steps + 1):
        seq = eligible[int(order_rng.integers(len(eligible)))]
        plan = sample_span_mask(len(seq) - 1, mask_cfg, rng=mask_rng)
        loss, _ = forward_loss(model, seq, plan, normalize=normalize)
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()
        record = TrainRecord(step=step_idx, loss=loss.item(),
                             masked_patches=len(plan.masked),
                             strategy=render_cfg.strategy.value)
        records.append(record)
        if on_record is not None:
            on_record(record)
        if checkpoint_path is not None and checkpoint_every and step_idx % checkpoint_every == 0:
            save_checkpoint(checkpoint_path, model, extra={"step": step_idx})
    return records


def encode_layers(seq: PatchSequence, model: PatchAutoencoder) -> list[np.ndarray]:
    """Per-layer hidden states with no masking: enc_layers + 1 arrays of
    shape (1 + patch count, hidden); position 0 is CLS, the EOS patch is the
    last position."""
    return model.encode_states(seq)
