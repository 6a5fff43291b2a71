"""
Parameter containers and the small layers every FMT component is built from.
"""

from typing import Dict, Iterator, List, Literal, Sequence, Tuple

import numpy as np

from src.autograd import ops
from src.autograd.tensor import Tensor
from src.utils.exceptions import ContractError
from src.utils.validators import check_width

Init = Literal["xavier", "normal", "zeros", "ones"]


def parameter(
    shape: Tuple[int, ...],
    rng: np.random.Generator,
    init: Init = "xavier",
    std: float = 0.02,
) -> Tensor:
    """
    Create a trainable tensor.

    Args:
        shape: Parameter shape
        rng: Generator the initial values are drawn from
        init: "xavier" (uniform Glorot over the first two dims), "normal", "zeros", "ones"
        std: Standard deviation for "normal"

    Returns:
        Tensor with requires_grad=True
    """
    if init == "xavier":
        fan_in, fan_out = shape[0], shape[-1]
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        data = rng.uniform(-limit, limit, size=shape)
    elif init == "normal":
        data = rng.normal(0.0, std, size=shape)
    elif init == "zeros":
        data = np.zeros(shape)
    elif init == "ones":
        data = np.ones(shape)
    else:
        raise ContractError(f"Unknown init: {init}")
    return Tensor(data, requires_grad=True)


class Module:
    """Base class: discovers parameters and sub-modules from attributes."""

    def named_parameters(self, prefix: str = "") -> Dict[str, Tensor]:
        """
        Collect trainable tensors in attribute order.

        Returns:
            Mapping of dotted name (e.g. "encoder.layers.0.attn.wq.weight") to tensor
        """
        found: Dict[str, Tensor] = {}
        for attr, value in vars(self).items():
            name = f"{prefix}{attr}"
            if isinstance(value, Tensor) and value.requires_grad:
                found[name] = value
            elif isinstance(value, Module):
                found.update(value.named_parameters(f"{name}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        found.update(item.named_parameters(f"{name}.{i}."))
        return found

    def parameters(self) -> Iterator[Tensor]:
        return iter(self.named_parameters().values())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


class Linear(Module):
    """Affine map x @ W + b over rows."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = parameter((in_dim, out_dim), rng)
        self.bias = parameter((1, out_dim), rng, init="zeros") if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        check_width("Linear", x.shape, self.in_dim)
        out = ops.matmul(x, self.weight)
        return ops.add_bias(out, self.bias) if self.bias is not None else out


class LayerNorm(Module):
    """Layer normalization over the last dimension with learned gain and bias."""

    def __init__(self, width: int, rng: np.random.Generator):
        self.gain = parameter((1, width), rng, init="ones")
        self.bias = parameter((1, width), rng, init="zeros")

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gain, self.bias)


def activate(x: Tensor, activation: str) -> Tensor:
    if activation == "gelu":
        return ops.gelu(x)
    if activation == "identity":
        return x
    raise ContractError(f"Unknown activation: {activation}")


class Mlp(Module):
    """Stack of affine layers with an activation after each (optionally not the last)."""

    def __init__(
        self,
        widths: Sequence[int],
        rng: np.random.Generator,
        activation: str = "gelu",
        activate_last: bool = True,
    ):
        if len(widths) < 2:
            raise ContractError("Mlp needs at least an input and an output width")
        self.widths = list(widths)
        self.activation = activation
        self.activate_last = activate_last
        self.layers: List[Linear] = [
            Linear(widths[i], widths[i + 1], rng) for i in range(len(widths) - 1)
        ]

    def __call__(self, x: Tensor) -> Tensor:
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < last or self.activate_last:
                x = activate(x, self.activation)
        return x
