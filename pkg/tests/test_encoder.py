"""
Tests for attention masks, masked attention, the encoder stack and modality dropout.
"""

import math

import numpy as np
import pytest

from src.autograd import ops
from src.models.embeddings import Modality, ModalityTag
from src.models.encoder import (
    DropoutPolicy,
    EncoderConfig,
    MaskedEncoder,
    MultiHeadAttention,
    Task,
    build_mask,
    sample_dropout,
)
from src.utils.exceptions import ConfigError, ContractError, DimensionError

I, i, T, t = (
    ModalityTag.IMAGE_CLS,
    ModalityTag.IMAGE,
    ModalityTag.TEXT_CLS,
    ModalityTag.TEXT,
)
TAGS = (I, i, i, T, t, t, t)
IMAGE_ROWS = range(0, 3)
TEXT_ROWS = range(3, 7)


def numpy_layer_norm(x, gain, bias, eps=1e-5):
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * gain + bias


def numpy_gelu(x):
    return 0.5 * x * (1.0 + np.tanh(math.sqrt(2.0 / math.pi) * (x + 0.044715 * x**3)))


def numpy_softmax(x):
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def numpy_encoder(x, encoder):
    """Unmasked post-norm encoder written directly against the parameter arrays."""
    for layer in encoder.layers:
        attn = layer.attn
        d_head = attn.d_model // attn.n_heads

        def affine(v, lin):
            return v @ lin.weight.data + lin.bias.data

        q, k, v = affine(x, attn.wq), affine(x, attn.wk), affine(x, attn.wv)
        heads = []
        for h in range(attn.n_heads):
            s = slice(h * d_head, (h + 1) * d_head)
            w = numpy_softmax(q[:, s] @ k[:, s].T / math.sqrt(d_head))
            heads.append(w @ v[:, s])
        a = affine(np.concatenate(heads, axis=1), attn.wo)
        x = numpy_layer_norm(x + a, layer.norm1.gain.data, layer.norm1.bias.data)
        ff = affine(numpy_gelu(affine(x, layer.ff_in)), layer.ff_out)
        x = numpy_layer_norm(x + ff, layer.norm2.gain.data, layer.norm2.bias.data)
    return x


class TestBuildMask:
    def test_joint_allows_everything(self):
        mask = build_mask(TAGS, Task.JOINT)
        assert np.all(mask.matrix == 0.0)
        assert mask.render() == ["." * 7] * 7

    def test_image_only_blocks_text_except_diagonal(self):
        mask = build_mask(TAGS, Task.IMAGE_ONLY)
        for r in range(7):
            for c in range(7):
                expected = r == c or (r in IMAGE_ROWS and c in IMAGE_ROWS)
                assert mask.allowed(r, c) == expected

    def test_text_only_mirrors_image_only(self):
        mask = build_mask(TAGS, Task.TEXT_ONLY)
        for r in range(7):
            for c in range(7):
                expected = r == c or (r in TEXT_ROWS and c in TEXT_ROWS)
                assert mask.allowed(r, c) == expected

    def test_joint_with_text_dropped_equals_image_only(self):
        dropped = build_mask(TAGS, Task.JOINT, dropped=Modality.TEXT)
        image_only = build_mask(TAGS, Task.IMAGE_ONLY)
        np.testing.assert_array_equal(dropped.matrix, image_only.matrix)

    def test_single_only_task_on_dropped_modality_is_diagonal(self):
        mask = build_mask(TAGS, Task.TEXT_ONLY, dropped=[Modality.TEXT])
        np.testing.assert_array_equal(mask.matrix == 0.0, np.eye(7, dtype=bool))

    def test_render_grid(self):
        mask = build_mask((I, i, T, t), Task.IMAGE_ONLY)
        assert mask.render() == ["..XX", "..XX", "XX.X", "XXX."]

    def test_empty_tags(self):
        with pytest.raises(ContractError):
            build_mask((), Task.JOINT)


class TestAttention:
    def test_prohibited_pairs_get_zero_weight(self, rng):
        attn = MultiHeadAttention(d_model=8, n_heads=2, rng=rng)
        x = ops.constant(rng.normal(size=(7, 8)))
        mask = build_mask(TAGS, Task.IMAGE_ONLY)
        _, weights = attn(x, mask, return_weights=True)
        assert len(weights) == 2
        blocked = mask.matrix != 0.0
        for w in weights:
            assert np.all(w.data[blocked] == 0.0)
            np.testing.assert_allclose(w.data.sum(axis=1), 1.0, rtol=0, atol=1e-12)

    def test_single_head_matches_direct_formula(self, rng):
        attn = MultiHeadAttention(d_model=6, n_heads=1, rng=rng)
        x = rng.normal(size=(4, 6))
        mask = build_mask((I, i, T, t), Task.TEXT_ONLY)
        out = attn(ops.constant(x), mask).data

        def affine(v, lin):
            return v @ lin.weight.data + lin.bias.data

        q, k, v = affine(x, attn.wq), affine(x, attn.wk), affine(x, attn.wv)
        scores = np.where(mask.matrix == 0.0, q @ k.T / math.sqrt(6), -np.inf)
        expected = affine(numpy_softmax(scores) @ v, attn.wo)
        np.testing.assert_allclose(out, expected, rtol=0, atol=1e-12)

    def test_single_token_attends_to_itself(self, rng):
        attn = MultiHeadAttention(d_model=4, n_heads=2, rng=rng)
        x = rng.normal(size=(1, 4))
        out, weights = attn(ops.constant(x), build_mask((I,), Task.JOINT), return_weights=True)
        assert all(w.data.tolist() == [[1.0]] for w in weights)
        value = x @ attn.wv.weight.data + attn.wv.bias.data
        expected = value @ attn.wo.weight.data + attn.wo.bias.data
        np.testing.assert_allclose(out.data, expected, rtol=0, atol=1e-12)

    def test_equal_scores_average_the_values(self, rng):
        attn = MultiHeadAttention(d_model=4, n_heads=1, rng=rng)
        attn.wq.weight.data = np.zeros((4, 4))
        attn.wq.bias.data = np.zeros((1, 4))
        x = rng.normal(size=(2, 4))
        out = attn(ops.constant(x), build_mask((I, T), Task.JOINT)).data
        value = x @ attn.wv.weight.data + attn.wv.bias.data
        mean = value.mean(axis=0, keepdims=True)
        expected = mean @ attn.wo.weight.data + attn.wo.bias.data
        np.testing.assert_allclose(out, np.vstack([expected, expected]), rtol=0, atol=1e-12)

    def test_mask_size_mismatch(self, rng):
        attn = MultiHeadAttention(d_model=8, n_heads=2, rng=rng)
        with pytest.raises(DimensionError):
            attn(ops.constant(rng.normal(size=(4, 8))), build_mask(TAGS, Task.JOINT))


class TestMaskedEncoder:
    def test_zero_mask_matches_reference_encoder(self, rng):
        encoder = MaskedEncoder(EncoderConfig(d_model=8, n_heads=2, n_layers=2, d_ff=16), rng)
        x = rng.normal(size=(7, 8))
        out = encoder(ops.constant(x), build_mask(TAGS, Task.JOINT))
        np.testing.assert_allclose(out.data, numpy_encoder(x, encoder), rtol=0, atol=1e-12)

    def test_text_rows_do_not_influence_image_only_pass(self, rng):
        encoder = MaskedEncoder(EncoderConfig(d_model=8, n_heads=2, n_layers=2, d_ff=16), rng)
        mask = build_mask(TAGS, Task.IMAGE_ONLY)
        x = rng.normal(size=(7, 8))
        base = encoder(ops.constant(x), mask).data
        x[3:] = rng.normal(size=(4, 8))
        moved = encoder(ops.constant(x), mask).data
        np.testing.assert_array_equal(base[:3], moved[:3])

    def test_zero_layers_pass_the_input_through(self, rng):
        encoder = MaskedEncoder(EncoderConfig(d_model=8, n_heads=2, n_layers=0, d_ff=16), rng)
        x = ops.constant(rng.normal(size=(7, 8)))
        assert encoder(x, build_mask(TAGS, Task.JOINT)) is x
        assert encoder.named_parameters() == {}

    def test_width_mismatch(self, rng):
        encoder = MaskedEncoder(EncoderConfig(d_model=8, n_heads=2, n_layers=1, d_ff=16), rng)
        with pytest.raises(DimensionError):
            encoder(ops.constant(rng.normal(size=(7, 6))), build_mask(TAGS, Task.JOINT))

    def test_indivisible_heads(self):
        with pytest.raises(ConfigError):
            EncoderConfig(d_model=10, n_heads=3, n_layers=1, d_ff=16)


class TestSampleDropout:
    def test_same_draw_index_same_decision(self):
        policy = DropoutPolicy(p_drop=0.5, rng_seed=7)
        first = [sample_dropout(policy, draw_index=k) for k in range(50)]
        second = [sample_dropout(policy, draw_index=k) for k in range(50)]
        assert first == second

    def test_zero_probability_never_drops(self):
        policy = DropoutPolicy(p_drop=0.0, rng_seed=3)
        assert all(sample_dropout(policy, draw_index=k) is None for k in range(100))

    def test_certain_drop_picks_both_modalities(self):
        policy = DropoutPolicy(p_drop=1.0, rng_seed=3)
        drops = [sample_dropout(policy, draw_index=k) for k in range(100)]
        assert None not in drops
        assert set(drops) == {Modality.IMAGE, Modality.TEXT}

    def test_certain_drop_splits_evenly_between_modalities(self):
        policy = DropoutPolicy(p_drop=1.0, rng_seed=11)
        n = 10_000
        images = sum(
            sample_dropout(policy, draw_index=k) == Modality.IMAGE for k in range(n)
        )
        assert abs(images - n / 2) <= 3 * math.sqrt(n * 0.25)

    def test_missing_modality_is_never_degraded(self):
        policy = DropoutPolicy(p_drop=1.0, rng_seed=3)
        assert sample_dropout(policy, has_image=False, has_text=True) is None
        assert sample_dropout(policy, has_image=True, has_text=False) is None

    def test_probability_outside_unit_interval(self):
        with pytest.raises(ValueError):
            DropoutPolicy(p_drop=1.5)
