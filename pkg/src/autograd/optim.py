"""
Adam optimizer with bias correction.

`adam_step` is a pure function over arrays so identical inputs give
bit-identical outputs; `Adam` wraps it for named parameter tensors.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from src.autograd.tensor import Tensor
from src.utils.exceptions import DimensionError


@dataclass(frozen=True)
class AdamState:
    """Moment estimates and hyperparameters of one Adam run."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def initialize(cls, params: Mapping[str, np.ndarray], **hyper: float) -> "AdamState":
        """Zero moments shaped like `params`, step_count 0."""
        return cls(
            first_moment={k: np.zeros_like(v) for k, v in params.items()},
            second_moment={k: np.zeros_like(v) for k, v in params.items()},
            **hyper,
        )


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, Optional[np.ndarray]],
    state: AdamState,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    Apply one Adam update.

    Args:
        params: Parameter arrays by name
        grads: Gradient arrays by name (missing or None means zero)
        state: Current optimizer state

    Returns:
        New parameter arrays and the advanced state
    """
    t = state.step_count + 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**t
    correction2 = 1.0 - b2**t

    new_params: Dict[str, np.ndarray] = {}
    first: Dict[str, np.ndarray] = {}
    second: Dict[str, np.ndarray] = {}
    for name, value in params.items():
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None or v is None:
            m, v = np.zeros_like(value), np.zeros_like(value)
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(value)
        for label, arr in (("gradient", g), ("first moment", m), ("second moment", v)):
            if arr.shape != value.shape:
                raise DimensionError(f"adam {label} for {name!r}", value.shape, arr.shape)

        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        new_params[name] = value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        first[name] = m
        second[name] = v

    return new_params, replace(state, step_count=t, first_moment=first, second_moment=second)


class Adam:
    """Optimizer over a fixed set of named parameter tensors."""

    def __init__(
        self,
        params: Mapping[str, Tensor],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        state: Optional[AdamState] = None,
    ):
        self.params = dict(params)
        self.state = state or AdamState.initialize(
            {k: p.data for k, p in self.params.items()},
            lr=lr,
            beta1=beta1,
            beta2=beta2,
            eps=eps,
        )

    def step(self) -> None:
        new_params, self.state = adam_step(
            {k: p.data for k, p in self.params.items()},
            {k: p.grad for k, p in self.params.items()},
            self.state,
        )
        for name, value in new_params.items():
            self.params[name].data = value

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()
