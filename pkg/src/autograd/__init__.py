"""Tensor/tape autograd core initialization."""

from . import ops
from .optim import Adam, AdamState, adam_step
from .tensor import MASKED, Tape, TapeNode, Tensor, backward, current_tape

__all__ = [
    "MASKED",
    "Tensor",
    "Tape",
    "TapeNode",
    "backward",
    "current_tape",
    "ops",
    "Adam",
    "AdamState",
    "adam_step",
]
