"""
Dense float64 tensors and the linear differentiation tape.

Operations (see ops.py) record themselves on the tape that is active in the
current context whenever one of their inputs participates in it. Outside a
`with Tape():` block nothing is recorded, which keeps frozen-model evaluation
free of shared mutable state.
"""

import itertools
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from src.utils.exceptions import ContractError

# Additive mask sentinel; softmax_rows maps it to exactly zero weight.
MASKED = float("-inf")

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_active_tape: ContextVar[Optional["Tape"]] = ContextVar("active_tape", default=None)
_tape_ids = itertools.count(1)


class Tensor:
    """Dense n-dimensional float64 array with an optional gradient accumulator."""

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        """
        Initialize a tensor.

        Args:
            data: Array-like numeric content (copied, stored row-major as float64)
            requires_grad: Whether this tensor is a trainable leaf
            name: Optional label used in error messages and checkpoints
        """
        self.data: np.ndarray = np.array(data, dtype=np.float64, order="C")
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.tape_id: Optional[int] = None
        self.name = name

    @classmethod
    def wrap(cls, array: np.ndarray) -> "Tensor":
        """Wrap a freshly computed array without copying it."""
        out = cls.__new__(cls)
        data = np.asarray(array, dtype=np.float64)
        # ascontiguousarray promotes 0-d to shape (1,); scalars must stay 0-d
        out.data = np.ascontiguousarray(data) if data.ndim else data
        out.requires_grad = False
        out.grad = None
        out.tape_id = None
        out.name = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    def numpy(self) -> np.ndarray:
        """Return a copy of the underlying array."""
        return self.data.copy()

    def item(self) -> float:
        if self.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Run reverse-mode differentiation from this scalar on the active tape."""
        backward(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from src.autograd import ops

        return ops.matmul(self, other)

    def __add__(self, other: "Tensor") -> "Tensor":
        from src.autograd import ops

        return ops.add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from src.autograd import ops

        return ops.sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from src.autograd import ops

        return ops.mul(self, other)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"


@dataclass
class TapeNode:
    """One recorded operation with the closure holding its local partials."""

    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Linear record of operations, replayed in reverse by backward()."""

    def __init__(self):
        self.id = next(_tape_ids)
        self.nodes: List[TapeNode] = []
        self._consumed = False
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def participates(self, tensor: Tensor) -> bool:
        return tensor.requires_grad or tensor.tape_id == self.id

    def record(
        self,
        op: str,
        inputs: Sequence[Tensor],
        output: Tensor,
        backward_fn: BackwardFn,
    ) -> None:
        if self._consumed:
            raise ContractError("cannot record on a tape after backward(); call reset()")
        output.tape_id = self.id
        self.nodes.append(TapeNode(op, tuple(inputs), output, backward_fn))

    def reset(self) -> None:
        """Forget all recorded nodes so the tape can be reused."""
        self.nodes = []
        self._consumed = False

    def backward(self, loss: Tensor) -> None:
        """
        Accumulate d(loss)/d(t) into `grad` of every participating tensor.

        Leaves (requires_grad) accumulate across calls until zero_grad();
        intermediate results receive a fresh gradient.

        Args:
            loss: Scalar tensor produced on this tape
        """
        if self._consumed:
            raise ContractError("backward() already ran on this tape; call reset() first")
        if loss.ndim != 0:
            raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")
        if loss.tape_id != self.id:
            raise ContractError("loss was not produced on this tape")

        grads: Dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
        for node in reversed(self.nodes):
            upstream = grads.get(id(node.output))
            if upstream is None:
                continue
            for tensor, partial in zip(node.inputs, node.backward(upstream)):
                if partial is None or not self.participates(tensor):
                    continue
                key = id(tensor)
                if key in grads:
                    grads[key] = grads[key] + partial
                else:
                    grads[key] = partial

        seen = set()
        for node in self.nodes:
            for tensor in (*node.inputs, node.output):
                if id(tensor) in seen or not self.participates(tensor):
                    continue
                seen.add(id(tensor))
                g = grads.get(id(tensor))
                if g is None:
                    g = np.zeros_like(tensor.data)
                if tensor.tape_id != self.id and tensor.grad is not None:
                    tensor.grad = tensor.grad + g
                else:
                    tensor.grad = np.array(g, dtype=np.float64).reshape(tensor.shape)

        self._consumed = True
        logger.debug(f"Backward over {len(self.nodes)} tape nodes")


def current_tape() -> Optional[Tape]:
    """Return the tape active in this context, if any."""
    return _active_tape.get()


def backward(loss: Tensor, tape: Optional[Tape] = None) -> None:
    """
    Run reverse-mode differentiation for a scalar loss.

    Args:
        loss: Scalar tensor produced on the tape
        tape: Tape to replay (defaults to the active one)
    """
    tape = tape or current_tape()
    if tape is None:
        raise ContractError("backward() needs an active tape")
    tape.backward(loss)
