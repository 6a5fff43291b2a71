"""
Tests for the training loop: determinism, zero step size, data checks and learning.
"""

import numpy as np
import pytest

from config import SMALL_MODEL_CONFIG, TRAIN_CONFIG
from src.config.settings import DataSettings, TrainingSettings, load_settings
from src.data.generator import generate
from src.data.splitting import SplitSpec, split
from src.models.fmt import FmtModel
from src.training import ablation
from src.training.checkpoint import encode_checkpoint
from src.training.evaluation import evaluate
from src.training.metrics import ConfusionCounts, MetricReport, accuracy
from src.training.trainer import check_data_fits, train
from src.utils.exceptions import ConfigError, ContractError, UndefinedMetricError


def snapshot(model):
    return {k: v.copy() for k, v in model.state_dict().items()}


class TestTrain:
    def test_zero_learning_rate_keeps_parameters(self, tiny_model, tiny_records):
        before = snapshot(tiny_model)
        config = TrainingSettings(epochs=1, batch_size=4, lr=0.0, show_progress=False)
        train(tiny_model, tiny_records, config)
        for name, value in tiny_model.state_dict().items():
            np.testing.assert_array_equal(value, before[name])

    def test_same_seed_same_checkpoint_bytes(self, tiny_settings, tiny_records, tiny_training):
        first = train(FmtModel(tiny_settings), tiny_records, tiny_training)
        second = train(FmtModel(tiny_settings), tiny_records, tiny_training)
        assert first.loss_log == second.loss_log
        assert encode_checkpoint(first.model, first.optimizer_state) == encode_checkpoint(
            second.model, second.optimizer_state
        )

    def test_different_seed_changes_the_run(self, tiny_settings, tiny_records, tiny_training):
        other = tiny_training.model_copy(update={"seed": 1})
        first = train(FmtModel(tiny_settings), tiny_records, tiny_training)
        second = train(FmtModel(tiny_settings), tiny_records, other)
        assert encode_checkpoint(first.model) != encode_checkpoint(second.model)

    def test_loss_log_has_one_entry_per_epoch(self, tiny_model, tiny_records, tiny_training):
        result = train(tiny_model, tiny_records, tiny_training)
        assert len(result.loss_log) == tiny_training.epochs
        assert all(np.isfinite(v) and v > 0 for v in result.loss_log)
        assert 0.0 <= result.train_accuracy <= 1.0
        assert result.optimizer_state.step_count == tiny_training.epochs * 6

    def test_auxiliary_losses(self, tiny_model, tiny_records, tiny_training):
        config = tiny_training.model_copy(update={"aux_loss_weight": 0.5, "epochs": 1})
        result = train(tiny_model, tiny_records, config)
        assert len(result.loss_log) == 1

    def test_resume_from_optimizer_state(self, tiny_settings, tiny_records, tiny_training):
        one_epoch = tiny_training.model_copy(update={"epochs": 1})
        first = train(FmtModel(tiny_settings), tiny_records, one_epoch)
        resumed = train(first.model, tiny_records, one_epoch, first.optimizer_state)
        assert resumed.optimizer_state.step_count == 2 * first.optimizer_state.step_count


class TestDataChecks:
    def test_mismatched_images_fail_before_any_step(self, tiny_model, tiny_training):
        records = generate(DataSettings(n=8, vocab=16, text_len=4, image_size=7))
        before = snapshot(tiny_model)
        with pytest.raises(ConfigError):
            train(tiny_model, records, tiny_training)
        for name, value in tiny_model.state_dict().items():
            np.testing.assert_array_equal(value, before[name])

    def test_vocabulary_too_large(self, tiny_model):
        records = generate(DataSettings(n=8, vocab=64, text_len=4, image_size=6))
        with pytest.raises(ConfigError):
            check_data_fits(tiny_model, records)

    def test_empty_dataset(self, tiny_model, tiny_training):
        with pytest.raises(ContractError):
            train(tiny_model, [], tiny_training)


VARIANT_ROWS = [
    "FMT",
    "image-only",
    "text-only",
    "fusion-no-stack",
    "fusion-without-cnn",
    "no-masking",
]


class TestAblation:
    def test_variant_settings(self, monkeypatch, tiny_settings, tiny_records, tiny_training):
        seen = {}

        def fake_run(name, train_records, test_records, model_settings, train_settings):
            seen[name] = (model_settings, train_settings)
            return MetricReport.from_counts(name, ConfusionCounts(tp=1, tn=1))

        monkeypatch.setattr(ablation, "run_variant", fake_run)
        positives = [r.model_copy(update={"label": 1}) for r in tiny_records]
        rows = ablation.ablate(
            positives,
            seed=3,
            model_settings=tiny_settings,
            train_settings=tiny_training,
            include_reference=False,
        )
        assert [r.model for r in rows] == VARIANT_ROWS
        assert all(r.source == "run" and r.n_eval == 2 for r in rows)

        without_cnn, _ = seen["fusion-without-cnn"]
        assert without_cnn.variant == "full"
        assert without_cnn.use_conv_backbone is False
        others = [ms for name, (ms, _) in seen.items() if name != "fusion-without-cnn"]
        assert all(ms.use_conv_backbone for ms in others)
        assert seen["image-only"][0].variant == "image_only"
        assert seen["no-masking"][1].p_drop == 0.0
        assert seen["FMT"][1].p_drop == tiny_training.p_drop
        assert {ms.init_seed for ms, _ in seen.values()} == {3}
        assert {ts.seed for _, ts in seen.values()} == {3}

    def test_model_without_backbone_trains(self, tiny_settings, tiny_records, tiny_training):
        with_cnn = FmtModel(tiny_settings)
        model = FmtModel(tiny_settings.model_copy(update={"use_conv_backbone": False}))
        assert model.image.backbone is None
        assert any(n.startswith("image.backbone.") for n in with_cnn.named_parameters())
        assert not any(n.startswith("image.backbone.") for n in model.named_parameters())
        result = train(model, tiny_records, tiny_training.model_copy(update={"epochs": 1}))
        assert np.isfinite(result.loss_log[0])

    def test_test_split_without_positives(self, tiny_settings, tiny_records, tiny_training):
        negatives = [r.model_copy(update={"label": 0}) for r in tiny_records]
        with pytest.raises(UndefinedMetricError, match="test split"):
            ablation.ablate(
                negatives, model_settings=tiny_settings, train_settings=tiny_training
            )


class TestRobustness:
    def test_rows_per_dropout_rate(self, tiny_settings, tiny_records, tiny_training):
        kwargs = dict(
            seeds=(0,),
            p_drops=(0.0, 1.0),
            model_settings=tiny_settings,
            train_settings=tiny_training.model_copy(update={"epochs": 1}),
        )
        rows = ablation.robustness(tiny_records, **kwargs)
        assert [r.p_drop for r in rows] == [0.0, 1.0]
        for row in rows:
            assert 0.0 <= row.accuracy <= 1.0
            assert 0.0 <= row.text_free_accuracy <= 1.0
            assert row.drop == row.accuracy - row.text_free_accuracy
        assert ablation.robustness(tiny_records, **kwargs) == rows

    def test_csv_row(self):
        row = ablation.RobustnessRow(p_drop=0.3, accuracy=0.9, text_free_accuracy=0.85)
        assert row.csv_row() == "0.3000,0.9000,0.8500,0.0500"


@pytest.mark.slow
class TestLearning:
    def test_separable_data_is_learned(self):
        settings = load_settings(
            SMALL_MODEL_CONFIG,
            overrides={
                "training": {"epochs": 30, "lr": 3e-3, "show_progress": False},
                "data": {"n": 200, "noise": 0.0, "image_size": 16},
            },
        )
        records = generate(settings.data)
        train_set, test_set = split(records, SplitSpec(seed=0))
        result = train(FmtModel(settings.model), train_set, settings.training)
        assert result.train_accuracy >= 0.95
        assert accuracy(evaluate(result.model, test_set)) >= 0.90


def benchmark_setup():
    """Small model on the moderate-noise benchmark where images beat text."""
    settings = load_settings(
        TRAIN_CONFIG,
        SMALL_MODEL_CONFIG,
        overrides={"training": {"show_progress": False}, "data": {"noise": 0.6, "n": 200}},
    )
    return settings, generate(settings.data)


@pytest.mark.slow
class TestBenchmarkOrdering:
    SEEDS = (0, 1, 2)

    def test_multimodal_model_beats_single_modalities(self):
        settings, records = benchmark_setup()
        variants = ("full", "image_only", "text_only", "fusion_no_stack")
        mean = dict.fromkeys(variants, 0.0)
        for seed in self.SEEDS:
            train_set, test_set = split(records, SplitSpec(seed=seed))
            ts = settings.training.model_copy(update={"seed": seed})
            for variant in variants:
                ms = settings.model.model_copy(update={"variant": variant, "init_seed": seed})
                report = ablation.run_variant(variant, train_set, test_set, ms, ts)
                mean[variant] += report.accuracy / len(self.SEEDS)
        assert mean["full"] >= mean["image_only"] >= mean["text_only"]
        assert mean["full"] >= mean["fusion_no_stack"]

    def test_modality_dropout_shrinks_text_free_drop(self):
        settings, records = benchmark_setup()
        without, with_dropout = ablation.robustness(
            records,
            seeds=self.SEEDS,
            p_drops=(0.0, 0.3),
            model_settings=settings.model,
            train_settings=settings.training,
        )
        assert with_dropout.drop < without.drop
