"""
Shared fixtures: a shrunken model configuration, small synthetic datasets and
a central finite-difference gradient checker.
"""

from typing import Callable, List, Optional, Sequence

import numpy as np
import pytest

from src.autograd.tensor import Tape, Tensor
from src.config.settings import DataSettings, ModelSettings, TrainingSettings
from src.data.generator import generate
from src.models.fmt import FmtModel

FD_STEP = 1e-5
RTOL = 1e-6
ATOL = 1e-8


def grads_close(analytic: float, numeric: float) -> bool:
    return abs(analytic - numeric) <= RTOL * max(abs(analytic), abs(numeric)) + ATOL


def check_gradients(
    fn: Callable[[Sequence[Tensor]], Tensor],
    arrays: Sequence[np.ndarray],
    max_entries: Optional[int] = None,
    seed: int = 0,
) -> None:
    """
    Compare tape gradients of fn against central differences.

    Args:
        fn: Maps input tensors to a scalar tensor
        arrays: Input values (copied)
        max_entries: Check at most this many entries per input (random subset)
        seed: Subset selection seed
    """
    leaves = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    with Tape() as tape:
        loss = fn(leaves)
        tape.backward(loss)

    rng = np.random.default_rng(seed)
    for k, array in enumerate(arrays):
        flat_indices = np.arange(array.size)
        if max_entries is not None and array.size > max_entries:
            flat_indices = rng.choice(array.size, size=max_entries, replace=False)
        for flat in flat_indices:
            idx = np.unravel_index(flat, array.shape)
            values = []
            for sign in (1.0, -1.0):
                perturbed = [a.copy() for a in arrays]
                perturbed[k][idx] += sign * FD_STEP
                values.append(fn([Tensor(p) for p in perturbed]).item())
            numeric = (values[0] - values[1]) / (2 * FD_STEP)
            analytic = float(leaves[k].grad[idx])
            assert grads_close(analytic, numeric), (
                f"input {k} entry {idx}: analytic {analytic!r} vs numeric {numeric!r}"
            )


def check_model_gradients(
    model: FmtModel,
    loss_fn: Callable[[], Tensor],
    entries_per_tensor: int = 5,
    seed: int = 0,
) -> None:
    """Finite-difference check over a random subset of every model parameter."""
    model.zero_grad()
    with Tape() as tape:
        tape.backward(loss_fn())

    rng = np.random.default_rng(seed)
    for name, param in model.named_parameters().items():
        # Parameters unused by this forward (other heads, absent rows) must stay flat.
        grad = param.grad if param.grad is not None else np.zeros_like(param.data)
        count = min(entries_per_tensor, param.size)
        for flat in rng.choice(param.size, size=count, replace=False):
            idx = np.unravel_index(flat, param.shape)
            original = param.data[idx]
            param.data[idx] = original + FD_STEP
            plus = loss_fn().item()
            param.data[idx] = original - FD_STEP
            minus = loss_fn().item()
            param.data[idx] = original
            numeric = (plus - minus) / (2 * FD_STEP)
            analytic = float(grad[idx])
            assert grads_close(analytic, numeric), (
                f"{name}{idx}: analytic {analytic!r} vs numeric {numeric!r}"
            )


@pytest.fixture
def grad_check():
    return check_gradients


@pytest.fixture
def model_grad_check():
    return check_model_gradients


@pytest.fixture
def tiny_settings() -> ModelSettings:
    """d_model 32, one layer, two heads, two experts, fusion 32 -> 16 -> 8 -> 8."""
    return ModelSettings(
        d_model=32,
        n_heads=2,
        n_layers=1,
        vocab_size=16,
        max_len=16,
        image_size=6,
        use_conv_backbone=True,
        conv_channels=2,
        conv_kernel=3,
        pool_size=2,
        fusion_widths=[16, 8, 8],
        n_experts=2,
        gru_hidden=8,
        num_classes=2,
        variant="full",
        init_seed=0,
    )


@pytest.fixture
def tiny_model(tiny_settings) -> FmtModel:
    return FmtModel(tiny_settings)


@pytest.fixture
def tiny_data_settings() -> DataSettings:
    return DataSettings(n=24, seed=5, noise=0.0, vocab=16, text_len=4, image_size=6)


@pytest.fixture
def tiny_records(tiny_data_settings) -> List:
    return generate(tiny_data_settings)


@pytest.fixture
def tiny_training() -> TrainingSettings:
    return TrainingSettings(
        epochs=2, batch_size=4, lr=1e-2, p_drop=0.3, seed=0, show_progress=False
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
