"""
Transformer encoder with modality-aware additive attention masks.

A mask entry is 0 where a token pair may interact and the MASKED sentinel
where it may not. The diagonal is always 0, so no softmax row is ever fully
masked and tokens of a dropped modality simply attend to themselves.
"""

import math
from dataclasses import dataclass
from enum import Enum
from typing import Collection, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from src.autograd import ops
from src.autograd.tensor import MASKED, Tensor
from src.utils.exceptions import ConfigError, ContractError, DimensionError

from .embeddings import Modality, ModalityTag, MultimodalSequence
from .layers import LayerNorm, Linear, Module

DropSpec = Union[None, Modality, Collection[Modality]]


class Task(str, Enum):
    """Encoder pass kinds sharing one set of weights."""

    JOINT = "joint"
    IMAGE_ONLY = "image-only"
    TEXT_ONLY = "text-only"

    @property
    def modality(self) -> Optional[Modality]:
        return {Task.IMAGE_ONLY: Modality.IMAGE, Task.TEXT_ONLY: Modality.TEXT}.get(self)


TASK_ORDER: Tuple[Task, ...] = (Task.JOINT, Task.IMAGE_ONLY, Task.TEXT_ONLY)


def as_drop_set(dropped: DropSpec) -> FrozenSet[Modality]:
    """Normalize None, a single modality, or a collection into a frozenset."""
    if dropped is None:
        return frozenset()
    if isinstance(dropped, Modality):
        return frozenset({dropped})
    return frozenset(Modality(m) for m in dropped)


@dataclass(frozen=True)
class AttentionMask:
    """Square additive mask: 0 = allowed, MASKED = prohibited."""

    matrix: np.ndarray

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    def allowed(self, i: int, j: int) -> bool:
        return bool(self.matrix[i, j] == 0.0)

    def render(self) -> List[str]:
        """ASCII grid, '.' allowed and 'X' prohibited, one string per row."""
        return ["".join("." if v == 0.0 else "X" for v in row) for row in self.matrix]


def build_mask(
    tags: Sequence[ModalityTag],
    task: Task,
    dropped: DropSpec = None,
) -> AttentionMask:
    """
    Build the modality-aware mask for one encoder pass.

    Pair (i, j) is allowed when i == j, or when both tokens belong to
    modalities that are active for the task and not dropped, and (for the
    single-modality tasks) both belong to the task's modality.

    Args:
        tags: Modality tag per token
        task: Joint, ImageOnly or TextOnly
        dropped: Modality (or modalities) removed from this sample

    Returns:
        AttentionMask of shape L x L
    """
    if not tags:
        raise ContractError("build_mask needs at least one token")
    gone = as_drop_set(dropped)
    focus = Task(task).modality

    active = np.array(
        [
            tag.modality not in gone and (focus is None or tag.modality == focus)
            for tag in tags
        ]
    )
    allowed = np.logical_and.outer(active, active)
    np.fill_diagonal(allowed, True)
    return AttentionMask(np.where(allowed, 0.0, MASKED))


class DropoutPolicy(BaseModel):
    """Per-sample modality dropout used during training."""

    p_drop: float = Field(default=0.0, ge=0.0, le=1.0)
    rng_seed: int = Field(default=0, ge=0)


def sample_dropout(
    policy: DropoutPolicy,
    has_image: bool = True,
    has_text: bool = True,
    draw_index: int = 0,
) -> Optional[Modality]:
    """
    Decide whether to drop one modality from a sample.

    With probability p_drop one of {image, text} is chosen uniformly. Samples
    already missing a modality are never degraded further. The draw depends
    only on (rng_seed, draw_index).
    """
    if not (has_image and has_text):
        return None
    rng = np.random.default_rng([policy.rng_seed, draw_index])
    if rng.random() >= policy.p_drop:
        return None
    return Modality.IMAGE if rng.random() < 0.5 else Modality.TEXT


@dataclass(frozen=True)
class EncoderConfig:
    d_model: int
    n_heads: int
    n_layers: int
    d_ff: int

    def __post_init__(self):
        if self.n_heads < 1 or self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )
        if self.n_layers < 0:
            raise ConfigError("n_layers must be >= 0")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads


class MultiHeadAttention(Module):
    """Query/key/value/output projections for masked multi-head attention."""

    def __init__(self, d_model: int, n_heads: int, rng: np.random.Generator):
        self.d_model = d_model
        self.n_heads = n_heads
        self.wq = Linear(d_model, d_model, rng)
        self.wk = Linear(d_model, d_model, rng)
        self.wv = Linear(d_model, d_model, rng)
        self.wo = Linear(d_model, d_model, rng)

    def __call__(
        self,
        x: Tensor,
        mask: AttentionMask,
        return_weights: bool = False,
    ) -> Union[Tensor, Tuple[Tensor, List[Tensor]]]:
        length = x.shape[0]
        if mask.matrix.shape != (length, length):
            raise DimensionError("attention mask does not match sequence", (length, length),
                                 mask.matrix.shape)
        d_head = self.d_model // self.n_heads
        q, k, v = self.wq(x), self.wk(x), self.wv(x)

        heads, weights = [], []
        for h in range(self.n_heads):
            lo, hi = h * d_head, (h + 1) * d_head
            qh, kh, vh = ops.cols(q, lo, hi), ops.cols(k, lo, hi), ops.cols(v, lo, hi)
            scores = ops.scale(ops.matmul(qh, ops.transpose(kh)), 1.0 / math.sqrt(d_head))
            w = ops.softmax_rows(ops.add_mask(scores, mask.matrix))
            heads.append(ops.matmul(w, vh))
            weights.append(w)

        merged = heads[0] if len(heads) == 1 else ops.concat_cols(heads)
        out = self.wo(merged)
        return (out, weights) if return_weights else out


def attention(
    x: Tensor,
    mask: AttentionMask,
    params: MultiHeadAttention,
    return_weights: bool = False,
):
    """
    Masked scaled dot-product attention: softmax(QK^T / sqrt(d_head) + mask) V per head,
    heads concatenated and projected.
    """
    return params(x, mask, return_weights=return_weights)


class EncoderLayer(Module):
    """Post-norm block: attention + residual + norm, feed-forward + residual + norm."""

    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        self.d_model = config.d_model
        self.attn = MultiHeadAttention(config.d_model, config.n_heads, rng)
        self.norm1 = LayerNorm(config.d_model, rng)
        self.ff_in = Linear(config.d_model, config.d_ff, rng)
        self.ff_out = Linear(config.d_ff, config.d_model, rng)
        self.norm2 = LayerNorm(config.d_model, rng)

    def __call__(self, x: Tensor, mask: AttentionMask) -> Tensor:
        x = self.norm1(ops.add(x, self.attn(x, mask)))
        return self.norm2(ops.add(x, self.ff_out(ops.gelu(self.ff_in(x)))))


class MaskedEncoder(Module):
    """Stack of masked encoder layers; weights are shared by every task pass."""

    def __init__(self, config: EncoderConfig, rng: np.random.Generator):
        self.config = config
        self.layers: List[EncoderLayer] = [
            EncoderLayer(config, rng) for _ in range(config.n_layers)
        ]

    def __call__(self, x: Tensor, mask: AttentionMask) -> Tensor:
        for i, layer in enumerate(self.layers):
            if x.ndim != 2 or x.shape[1] != layer.d_model:
                raise DimensionError(
                    f"encoder layer {i} expects width {layer.d_model}", x.shape
                )
            if mask.size != x.shape[0]:
                raise DimensionError(
                    f"encoder layer {i} mask does not match sequence",
                    x.shape,
                    mask.matrix.shape,
                )
            x = layer(x, mask)
        return x


def encoder_forward(
    seq: MultimodalSequence,
    mask: AttentionMask,
    encoder: MaskedEncoder,
) -> Tensor:
    """Run the encoder over an assembled sequence; returns Tensor[L x d]."""
    return encoder(seq.embeddings, mask)
