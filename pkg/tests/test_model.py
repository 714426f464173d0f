"""Masked patch autoencoder: parameter counts, loss scope, training determinism."""

import numpy as np
import pytest
import torch

from patchtext.masking import MaskConfig, MaskPlan, sample_span_mask
from patchtext.model import (
    PRESETS,
    ModelConfig,
    TrainRecord,
    encode_layers,
    encoder_parameter_count,
    forward_loss,
    grad_check,
    init_params,
    load_checkpoint,
    masked_loss,
    reconstruction_targets,
    save_checkpoint,
    smoothed_losses,
    train_steps,
)
from patchtext.render import RenderConfig, Strategy, render

BIGRAMS = RenderConfig(strategy=Strategy.BIGRAMS)


def closed_form_encoder_params(layers: int, hidden: int, mlp: int) -> int:
    """Patch projection + CLS + transformer blocks + final layernorm."""
    proj = 256 * hidden + hidden
    cls = hidden
    qkv = 3 * hidden * hidden + 3 * hidden
    attn_out = hidden * hidden + hidden
    mlp_params = hidden * mlp + mlp + mlp * hidden + hidden
    norms = 4 * hidden
    block = qkv + attn_out + mlp_params + norms
    return proj + cls + layers * block + 2 * hidden


@pytest.fixture(scope="module")
def desk_model():
    return init_params(ModelConfig.preset("desk"), seed=0)


@pytest.fixture(scope="module")
def sample_seq(font):
    return render("He came from the small house.", BIGRAMS, font)


@pytest.fixture(scope="module")
def sample_plan(sample_seq):
    return sample_span_mask(len(sample_seq) - 1, MaskConfig(ratio=0.25, max_span=6, seed=0))


# --------------------------------------------------------------------------
# Configuration and parameter counts
# --------------------------------------------------------------------------

def test_presets_are_the_documented_scales():
    assert PRESETS["base"] == (12, 8, 768, 3072, 12)
    assert PRESETS["small"] == (12, 4, 384, 1536, 6)
    assert PRESETS["tiny"] == (12, 2, 192, 768, 3)
    assert PRESETS["desk"] == (2, 1, 32, 64, 2)
    with pytest.raises(ValueError):
        ModelConfig.preset("galactic")


def test_model_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(hidden=30, heads=4)
    with pytest.raises(ValueError):
        ModelConfig(patch_dim=128)


def test_desk_parameter_count_matches_closed_form(desk_model):
    cfg = desk_model.cfg
    assert encoder_parameter_count(desk_model) == closed_form_encoder_params(
        cfg.enc_layers, cfg.hidden, cfg.mlp)


def test_tiny_parameter_count_matches_closed_form():
    model = init_params(ModelConfig.preset("tiny"), seed=0)
    assert encoder_parameter_count(model) == closed_form_encoder_params(12, 192, 768)
    assert encoder_parameter_count(model) == 5_388_288


# --------------------------------------------------------------------------
# Initialization
# --------------------------------------------------------------------------

def test_init_is_seed_deterministic():
    a = init_params(ModelConfig.preset("desk"), seed=7)
    b = init_params(ModelConfig.preset("desk"), seed=7)
    for (name, pa), (_, pb) in zip(a.state_dict().items(), b.state_dict().items()):
        assert torch.equal(pa, pb), name
    c = init_params(ModelConfig.preset("desk"), seed=8)
    assert not torch.equal(a.patch_proj.weight, c.patch_proj.weight)


def test_init_biases_zero_and_norm_scales_one(desk_model):
    assert torch.equal(desk_model.patch_proj.bias, torch.zeros(32))
    assert torch.equal(desk_model.enc_norm.weight, torch.ones(32))
    assert torch.equal(desk_model.enc_norm.bias, torch.zeros(32))


# --------------------------------------------------------------------------
# Loss scope
# --------------------------------------------------------------------------

def test_masked_loss_reads_only_masked_patches(sample_seq):
    plan = sample_span_mask(len(sample_seq) - 1, MaskConfig(seed=3))
    preds = torch.randn(len(plan.masked), 256, generator=torch.Generator().manual_seed(0))
    base = masked_loss(preds, sample_seq.patches, plan.masked)

    unmasked = [i for i in range(len(sample_seq) - 1) if i not in plan.masked]
    scrambled = sample_seq.patches.copy()
    scrambled[unmasked[0]] = 255 - scrambled[unmasked[0]]
    scrambled[-1] = 0  # even the EOS patch is outside the loss
    assert torch.equal(masked_loss(preds, scrambled, plan.masked), base)

    touched = sample_seq.patches.copy()
    touched[plan.masked[0]] = 255 - touched[plan.masked[0]]
    assert not torch.equal(masked_loss(preds, touched, plan.masked), base)


def test_reconstruction_targets_shapes_and_normalization(sample_seq, sample_plan):
    targets = reconstruction_targets(sample_seq.patches, sample_plan.masked)
    assert targets.shape == (len(sample_plan.masked), 256)
    assert targets.dtype == torch.float32
    raw = reconstruction_targets(sample_seq.patches, sample_plan.masked, normalize=False)
    i = sample_plan.masked[0]
    assert torch.allclose(raw[0], torch.from_numpy(
        sample_seq.patches[i].reshape(-1).astype(np.float64) / 255.0).float())


def test_forward_loss_is_deterministic(desk_model, sample_seq, sample_plan):
    loss_a, preds_a = forward_loss(desk_model, sample_seq, sample_plan)
    loss_b, preds_b = forward_loss(desk_model, sample_seq, sample_plan)
    assert loss_a.item() == loss_b.item()
    assert np.array_equal(preds_a, preds_b)
    assert preds_a.shape == (len(sample_plan.masked), 256)
    assert loss_a.item() > 0.0


def test_forward_loss_rejects_empty_plan(desk_model, sample_seq):
    empty = MaskPlan(n=len(sample_seq) - 1, masked=(), spans=())
    with pytest.raises(ValueError):
        forward_loss(desk_model, sample_seq, empty)


def test_forward_loss_rejects_mismatched_plan(desk_model, sample_seq):
    plan = sample_span_mask(3, MaskConfig(seed=0))
    assert plan.n != len(sample_seq) - 1
    with pytest.raises(ValueError):
        forward_loss(desk_model, sample_seq, plan)


def test_gradients_match_finite_differences(desk_model, font):
    seq = render("pixel words", BIGRAMS, font)
    plan = sample_span_mask(len(seq) - 1, MaskConfig(ratio=0.5, seed=1))
    worst = grad_check(desk_model, seq, plan, samples=60, seed=0)
    assert worst <= 1e-4


# --------------------------------------------------------------------------
# Training loop
# --------------------------------------------------------------------------

def test_train_steps_records_and_determinism(font, corpus_10k):
    corpus = corpus_10k[:20]
    cfg = ModelConfig.preset("desk")

    def run():
        torch.manual_seed(0)
        model = init_params(cfg, seed=0)
        return train_steps(corpus, model, BIGRAMS, MaskConfig(seed=0),
                           steps=8, seed=5, font=font)

    records_a, records_b = run(), run()
    assert [r.step for r in records_a] == list(range(1, 9))
    assert all(r.loss > 0 and np.isfinite(r.loss) for r in records_a)
    assert all(r.masked_patches >= 1 for r in records_a)
    assert all(r.strategy == "bigrams" for r in records_a)
    assert [r.loss for r in records_a] == [r.loss for r in records_b]
    assert [r.masked_patches for r in records_a] == [r.masked_patches for r in records_b]


def test_train_steps_rejects_empty_and_blank_corpora(font):
    model = init_params(ModelConfig.preset("desk"), seed=0)
    with pytest.raises(ValueError):
        train_steps([], model, BIGRAMS, MaskConfig(), steps=1, font=font)
    with pytest.raises(ValueError):
        train_steps(["", "   "], model, BIGRAMS, MaskConfig(), steps=1, font=font)


def test_train_steps_skips_blank_lines_with_warning(font, caplog):
    model = init_params(ModelConfig.preset("desk"), seed=0)
    with caplog.at_level("WARNING", logger="patchtext.model"):
        records = train_steps(["ab cd", ""], model, BIGRAMS, MaskConfig(),
                              steps=2, font=font)
    assert len(records) == 2
    assert any("skipped 1" in message for message in caplog.messages)


def test_smoothed_losses_trailing_mean():
    records = [TrainRecord(step=i + 1, loss=float(i + 1), masked_patches=1,
                           strategy="bigrams") for i in range(5)]
    smoothed = smoothed_losses(records, window=2)
    assert np.allclose(smoothed, [1.0, 1.5, 2.5, 3.5, 4.5])
    wide = smoothed_losses(records, window=100)
    assert np.allclose(wide, [1.0, 1.5, 2.0, 2.5, 3.0])
    assert wide[-1] == pytest.approx(np.mean([r.loss for r in records]))
    with pytest.raises(ValueError):
        smoothed_losses(records, window=0)


def test_train_record_rejects_negative_loss():
    with pytest.raises(ValueError):
        TrainRecord(step=1, loss=-0.5, masked_patches=1, strategy="mono")


# --------------------------------------------------------------------------
# Checkpoints
# --------------------------------------------------------------------------

def test_checkpoint_round_trip_preserves_behavior(tmp_path, desk_model, sample_seq, sample_plan):
    path = tmp_path / "model.pxck"
    save_checkpoint(path, desk_model, extra={"train": {"steps": 0}})
    loaded, config = load_checkpoint(path)
    assert config["model"] == desk_model.cfg.to_dict()
    assert config["train"] == {"steps": 0}
    assert "toolkit_version" in config
    for (name, pa), (_, pb) in zip(desk_model.state_dict().items(),
                                   loaded.state_dict().items()):
        assert torch.equal(pa, pb), name
    loss_a, _ = forward_loss(desk_model, sample_seq, sample_plan)
    loss_b, _ = forward_loss(loaded, sample_seq, sample_plan)
    assert loss_a.item() == loss_b.item()


# --------------------------------------------------------------------------
# Layer states for analysis
# --------------------------------------------------------------------------

def test_encode_layers_shapes(desk_model, sample_seq):
    states = encode_layers(sample_seq, desk_model)
    assert len(states) == desk_model.cfg.enc_layers + 1
    for state in states:
        assert state.shape == (len(sample_seq) + 1, desk_model.cfg.hidden)
        assert state.dtype == np.float32


def test_encode_layers_layer_zero_is_embeddings(desk_model, sample_seq):
    from patchtext.masking import sinusoidal_positions

    states = encode_layers(sample_seq, desk_model)
    pixels = sample_seq.patches.reshape(len(sample_seq), -1).astype(np.float64) / 255.0
    with torch.no_grad():
        tokens = desk_model.patch_proj(torch.from_numpy(pixels).float()).numpy()
    pos = sinusoidal_positions(len(sample_seq) + 1, desk_model.cfg.hidden)
    expected_row1 = tokens[0] + pos[1].astype(np.float32)
    assert np.allclose(states[0][1], expected_row1, atol=1e-6)
    cls = desk_model.cls_token.detach().numpy() + pos[0]
    assert np.allclose(states[0][0], cls, atol=1e-6)
