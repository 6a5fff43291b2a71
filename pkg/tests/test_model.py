"""
Tests for the assembled model: forward contract, masking invariances, variants
and end-to-end gradients.
"""

import numpy as np
import pytest

from src.autograd import ops
from src.config.settings import ModelSettings
from src.models.embeddings import Modality
from src.models.fmt import FmtModel
from src.utils.exceptions import ConfigError


def with_variant(settings: ModelSettings, variant: str) -> ModelSettings:
    return ModelSettings(**{**settings.model_dump(), "variant": variant})


@pytest.fixture
def sample(rng):
    return rng.random(36), [1, 5, 9, 2]


class TestForward:
    def test_probabilities_sum_to_one(self, tiny_model, sample):
        image, tokens = sample
        out = tiny_model(image, tokens)
        assert out.probs.shape == (1, 2)
        assert out.probs.data.sum() == pytest.approx(1.0, abs=1e-12)
        assert len(out.layer_outputs) == 3
        assert out.fused.shape == (3, 8)

    def test_same_seed_same_parameters(self, tiny_settings):
        a, b = FmtModel(tiny_settings), FmtModel(tiny_settings)
        for name, value in a.state_dict().items():
            np.testing.assert_array_equal(value, b.state_dict()[name])

    def test_parallel_passes_match_sequential(self, tiny_model, sample):
        image, tokens = sample
        sequential = tiny_model(image, tokens).probs.data
        parallel = tiny_model(image, tokens, parallel=True).probs.data
        np.testing.assert_array_equal(sequential, parallel)

    def test_forward_does_not_touch_parameters(self, tiny_model, sample):
        before = {k: v.copy() for k, v in tiny_model.state_dict().items()}
        tiny_model(*sample)
        for name, value in tiny_model.state_dict().items():
            np.testing.assert_array_equal(value, before[name])


class TestMaskingInvariance:
    def test_dropped_text_content_never_matters(self, tiny_model, rng):
        image = rng.random(36)
        base = tiny_model(image, [1, 2, 3, 4], dropped=Modality.TEXT).probs.data
        for _ in range(100):
            tokens = rng.integers(0, 16, size=4).tolist()
            out = tiny_model(image, tokens, dropped=Modality.TEXT).probs.data
            np.testing.assert_array_equal(out, base)

    def test_dropped_image_content_never_matters(self, tiny_model, rng):
        tokens = [3, 3, 7, 1]
        base = tiny_model(rng.random(36), tokens, dropped=Modality.IMAGE).probs.data
        for _ in range(10):
            out = tiny_model(rng.random(36), tokens, dropped=Modality.IMAGE).probs.data
            np.testing.assert_array_equal(out, base)

    def test_missing_text_uses_absent_slot(self, tiny_model, rng):
        out = tiny_model(rng.random(36), None)
        assert out.task_outputs[2] is None
        np.testing.assert_array_equal(out.fused.data[2], tiny_model.absent.table.data[2])

    def test_both_modalities_dropped_is_constant(self, tiny_model, rng):
        both = [Modality.IMAGE, Modality.TEXT]
        first = tiny_model(rng.random(36), [1, 2], dropped=both).probs.data
        second = tiny_model(rng.random(36), [9, 9, 9], dropped=both).probs.data
        np.testing.assert_array_equal(first, second)
        np.testing.assert_array_equal(tiny_model(None, None).probs.data, first)


class TestVariants:
    def test_image_only_ignores_text(self, tiny_settings, rng):
        model = FmtModel(with_variant(tiny_settings, "image_only"))
        image = rng.random(36)
        base = model(image, [1, 2, 3]).probs.data
        np.testing.assert_array_equal(model(image, [8, 9, 10]).probs.data, base)
        out = model(image, [1, 2, 3])
        assert out.task_outputs[0] is None and out.task_outputs[2] is None
        assert out.layer_outputs == []

    def test_text_only_ignores_image(self, tiny_settings, rng):
        model = FmtModel(with_variant(tiny_settings, "text_only"))
        tokens = [4, 5, 6]
        base = model(rng.random(36), tokens).probs.data
        np.testing.assert_array_equal(model(rng.random(36), tokens).probs.data, base)

    def test_fusion_no_stack_uses_direct_head(self, tiny_settings, sample):
        model = FmtModel(with_variant(tiny_settings, "fusion_no_stack"))
        out = model(*sample)
        expected = ops.softmax_rows(model.direct_head(ops.mean_rows(out.fused))).data
        np.testing.assert_array_equal(out.probs.data, expected)


class TestGradients:
    @pytest.mark.parametrize("variant", ["full", "fusion_no_stack"])
    def test_model_gradients_match_finite_differences(
        self, tiny_settings, model_grad_check, sample, variant
    ):
        model = FmtModel(with_variant(tiny_settings, variant))
        image, tokens = sample

        def loss():
            return ops.cross_entropy(model(image, tokens).probs, 1)

        model_grad_check(model, loss, entries_per_tensor=3)


class TestParameters:
    def test_names_are_unique_per_tensor(self, tiny_model):
        named = tiny_model.named_parameters()
        assert len({id(p) for p in named.values()}) == len(named)
        assert "text.word_table" in named
        assert "gate.readout.weight" in named

    def test_check_compatible(self, tiny_model):
        tiny_model.check_compatible(image_dim=36, vocab=16, text_len=4, num_classes=2)
        with pytest.raises(ConfigError):
            tiny_model.check_compatible(image_dim=49, vocab=16, text_len=4, num_classes=2)
        with pytest.raises(ConfigError):
            tiny_model.check_compatible(image_dim=36, vocab=17, text_len=4, num_classes=2)
        with pytest.raises(ConfigError):
            tiny_model.check_compatible(image_dim=36, vocab=16, text_len=14, num_classes=2)
