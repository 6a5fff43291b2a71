"""
Stacking mixture-of-experts head.

Task outputs are resized to a common width, fused by a three-layer
perceptron, refined by three cascaded expert layers (each attention-weighting
its experts' outputs), and integrated over the cascade by a two-cell GRU
whose final state drives the class readout.
"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.autograd import ops
from src.autograd.tensor import Tensor
from src.utils.exceptions import ContractError
from src.utils.validators import check_width

from .layers import Linear, Mlp, Module, parameter

N_TASK_SLOTS = 3
N_EXPERT_LAYERS = 3


def interpolation_matrix(n: int, m: int) -> np.ndarray:
    """
    Linear resampling matrix W (n x m) with endpoints aligned, so that v @ W
    evaluates v at positions j * (n - 1) / (m - 1).
    """
    if n < 1 or m < 1:
        raise ContractError(f"interpolation needs n >= 1 and m >= 1, got n={n}, m={m}")
    w = np.zeros((n, m))
    if n == 1:
        w[0, :] = 1.0
        return w
    if m == 1:
        w[0, 0] = 1.0
        return w
    for j in range(m):
        pos = j * (n - 1) / (m - 1)
        i0 = min(int(math.floor(pos)), n - 1)
        frac = pos - i0
        if i0 >= n - 1 or frac == 0.0:
            w[i0, j] = 1.0
        else:
            w[i0, j] = 1.0 - frac
            w[i0 + 1, j] = frac
    return w


def interpolate_resize(v: Tensor, m: int) -> Tensor:
    """
    Resample a 1 x n row to width m by linear interpolation.

    n == m returns the input unchanged.
    """
    if v.ndim == 1:
        v = ops.reshape(v, (1, v.shape[0]))
    if v.shape[0] != 1:
        raise ContractError(f"interpolate_resize expects a single row, got {v.shape}")
    n = v.shape[1]
    if n == m:
        return v
    return ops.matmul(v, ops.constant(interpolation_matrix(n, m)))


class AbsentEmbedding(Module):
    """One learned row per task slot, substituted when that slot's modality is missing."""

    def __init__(self, width: int, rng: np.random.Generator, n_slots: int = N_TASK_SLOTS):
        self.table = parameter((n_slots, width), rng, init="normal")

    def row(self, slot: int) -> Tensor:
        return ops.rows(self.table, [slot])


class FusionLayer(Module):
    """Interpolate to target_dim, then a 3-layer perceptron and parameter-free normalization."""

    def __init__(self, target_dim: int, widths: Sequence[int], rng: np.random.Generator):
        if len(widths) != 3:
            raise ContractError(f"fusion needs exactly three widths, got {list(widths)}")
        self.target_dim = target_dim
        self.widths = list(widths)
        self.mlp = Mlp([target_dim, *widths], rng, activate_last=True)

    @property
    def output_dim(self) -> int:
        return self.widths[-1]

    def fuse_one(self, task_output: Tensor) -> Tensor:
        resized = interpolate_resize(task_output, self.target_dim)
        return ops.layer_norm(self.mlp(resized))

    def fuse(self, task_outputs: Sequence[Optional[Tensor]], absent: AbsentEmbedding) -> Tensor:
        """
        Fuse the three task slots into a 3 x width matrix.

        Args:
            task_outputs: One entry per slot (Joint, ImageOnly, TextOnly); None marks absent
            absent: Substitutes for absent slots

        Returns:
            Tensor[3 x width] in fixed slot order
        """
        if len(task_outputs) != N_TASK_SLOTS:
            raise ContractError(
                f"fuse expects {N_TASK_SLOTS} task slots, got {len(task_outputs)}"
            )
        rows = [
            absent.row(slot) if out is None else self.fuse_one(out)
            for slot, out in enumerate(task_outputs)
        ]
        return ops.concat_rows(rows)


class ExpertLayer(Module):
    """E two-layer experts whose outputs are weighted by a learned score vector."""

    def __init__(
        self,
        width: int,
        n_experts: int,
        rng: np.random.Generator,
        activation: str = "gelu",
    ):
        if n_experts < 1:
            raise ContractError("an expert layer needs at least one expert")
        self.width = width
        self.experts: List[Mlp] = [
            Mlp([width, width, width], rng, activation=activation, activate_last=False)
            for _ in range(n_experts)
        ]
        self.score_vector = parameter((width, 1), rng, init="normal", std=1.0 / math.sqrt(width))

    def __call__(self, h: Tensor, return_weights: bool = False):
        check_width("ExpertLayer", h.shape, self.width)
        outputs = ops.concat_rows([expert(h) for expert in self.experts])
        scores = ops.scale(ops.matmul(outputs, self.score_vector), 1.0 / math.sqrt(self.width))
        weights = ops.softmax_rows(ops.transpose(scores))
        mixed = ops.matmul(weights, outputs)
        return (mixed, weights) if return_weights else mixed


def expert_layer_forward(h: Tensor, layer: ExpertLayer) -> Tensor:
    """o_e = MLP_e(h); w = softmax(o_e . score / sqrt(width)); return sum_e w_e o_e."""
    return layer(h)


class StackedExperts(Module):
    """Three expert layers applied in series."""

    def __init__(
        self,
        width: int,
        n_experts: int,
        rng: np.random.Generator,
        activation: str = "gelu",
    ):
        self.layers: List[ExpertLayer] = [
            ExpertLayer(width, n_experts, rng, activation) for _ in range(N_EXPERT_LAYERS)
        ]

    def __call__(self, fused: Tensor) -> List[Tensor]:
        if fused.ndim != 2 or fused.shape[0] != N_TASK_SLOTS:
            raise ContractError(f"stack expects {N_TASK_SLOTS} fused rows, got {fused.shape}")
        h = ops.mean_rows(fused)
        outputs = []
        for layer in self.layers:
            h = expert_layer_forward(h, layer)
            outputs.append(h)
        return outputs


def stack_forward(fused: Tensor, stack: StackedExperts) -> List[Tensor]:
    """h0 = mean of fused rows; h_{k+1} = expert layer k (h_k); returns [h1, h2, h3]."""
    return stack(fused)


class GruCell(Module):
    """Standard GRU cell: update gate, reset gate, candidate, convex combination."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.w_z = Linear(input_dim, hidden_dim, rng)
        self.w_r = Linear(input_dim, hidden_dim, rng)
        self.w_n = Linear(input_dim, hidden_dim, rng)
        self.u_z = Linear(hidden_dim, hidden_dim, rng, bias=False)
        self.u_r = Linear(hidden_dim, hidden_dim, rng, bias=False)
        self.u_n = Linear(hidden_dim, hidden_dim, rng, bias=False)

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        z = ops.sigmoid(ops.add(self.w_z(x), self.u_z(h)))
        r = ops.sigmoid(ops.add(self.w_r(x), self.u_r(h)))
        n = ops.tanh(ops.add(self.w_n(x), ops.mul(r, self.u_n(h))))
        # h' = (1 - z) * n + z * h
        return ops.add(n, ops.mul(z, ops.sub(h, n)))


class GatingGru(Module):
    """Two stacked GRU cells over the cascade outputs, then an affine readout."""

    def __init__(
        self,
        input_dim: int,
        hidden_dim: int,
        num_classes: int,
        rng: np.random.Generator,
    ):
        self.hidden_dim = hidden_dim
        self.cells: List[GruCell] = [
            GruCell(input_dim, hidden_dim, rng),
            GruCell(hidden_dim, hidden_dim, rng),
        ]
        self.readout = Linear(hidden_dim, num_classes, rng)

    def __call__(self, layer_outputs: Sequence[Tensor]) -> Tuple[Tensor, Tensor]:
        """Return (logits, probabilities), each 1 x num_classes."""
        if len(layer_outputs) != N_EXPERT_LAYERS:
            raise ContractError(
                f"gating expects {N_EXPERT_LAYERS} steps, got {len(layer_outputs)}"
            )
        states = [ops.constant(np.zeros((1, self.hidden_dim))) for _ in self.cells]
        for x in layer_outputs:
            inp = x
            for i, cell in enumerate(self.cells):
                states[i] = cell(inp, states[i])
                inp = states[i]
        logits = self.readout(states[-1])
        return logits, ops.softmax_rows(logits)


def gate_and_classify(layer_outputs: Sequence[Tensor], gate: GatingGru) -> Tensor:
    """Probability row over classes from the GRU's final top-cell state."""
    return gate(layer_outputs)[1]
