"""
Multimodal embedding: text lookup tables, the image projector and sequence assembly.

The composite sequence handed to the encoder is always laid out as
[ImageCls, Image x n_img, TextCls, Text x n_txt].
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.autograd import ops
from src.autograd.tensor import Tensor
from src.utils.exceptions import ContractError, DimensionError, VocabularyError
from src.utils.validators import check_width

from .layers import Mlp, Module, parameter


class Modality(str, Enum):
    IMAGE = "image"
    TEXT = "text"


class ModalityTag(str, Enum):
    IMAGE_CLS = "ImageCls"
    IMAGE = "Image"
    TEXT_CLS = "TextCls"
    TEXT = "Text"

    @property
    def modality(self) -> Modality:
        if self in (ModalityTag.IMAGE_CLS, ModalityTag.IMAGE):
            return Modality.IMAGE
        return Modality.TEXT

    @property
    def is_cls(self) -> bool:
        return self in (ModalityTag.IMAGE_CLS, ModalityTag.TEXT_CLS)


@dataclass(frozen=True)
class MultimodalSequence:
    """Token embeddings plus one modality tag per row."""

    embeddings: Tensor
    modality_tags: Tuple[ModalityTag, ...]

    @property
    def length(self) -> int:
        return len(self.modality_tags)

    @property
    def n_img(self) -> int:
        return self.modality_tags.count(ModalityTag.IMAGE)

    @property
    def n_txt(self) -> int:
        return self.modality_tags.count(ModalityTag.TEXT)

    def cls_index(self, modality: Modality) -> int:
        tag = ModalityTag.IMAGE_CLS if modality == Modality.IMAGE else ModalityTag.TEXT_CLS
        return self.modality_tags.index(tag)


class TextEmbedder(Module):
    """Sum of word, segment and position embeddings."""

    def __init__(self, vocab_size: int, d_model: int, max_len: int, rng: np.random.Generator):
        self.vocab_size = vocab_size
        self.d_model = d_model
        self.max_len = max_len
        self.word_table = parameter((vocab_size, d_model), rng, init="normal")
        self.segment_table = parameter((2, d_model), rng, init="normal")
        self.position_table = parameter((max_len, d_model), rng, init="normal")

    def embed_text(
        self,
        token_ids: Sequence[int],
        segment_ids: Optional[Sequence[int]] = None,
        offset: int = 0,
    ) -> Tensor:
        """
        Embed a token sequence.

        Args:
            token_ids: Token ids, each < vocab_size
            segment_ids: Segment ids in {0, 1} (all zero when omitted)
            offset: Position of the first token in the composite sequence

        Returns:
            Tensor[n x d] with row i = word[tok_i] + segment[seg_i] + position[offset + i]
        """
        tokens = [int(t) for t in token_ids]
        segments = [0] * len(tokens) if segment_ids is None else [int(s) for s in segment_ids]
        if len(segments) != len(tokens):
            raise ContractError(
                f"token_ids ({len(tokens)}) and segment_ids ({len(segments)}) differ in length"
            )
        for i, tok in enumerate(tokens):
            if not 0 <= tok < self.vocab_size:
                raise VocabularyError(f"token id {tok} outside vocabulary of {self.vocab_size}", i)
        for i, seg in enumerate(segments):
            if not 0 <= seg < 2:
                raise VocabularyError(f"segment id {seg} outside [0, 2)", i)
        if offset < 0 or offset + len(tokens) > self.max_len:
            raise VocabularyError(
                f"positions up to {offset + len(tokens)} exceed max_len {self.max_len}",
                offset + len(tokens) - 1,
            )

        positions = list(range(offset, offset + len(tokens)))
        out = ops.add(
            ops.rows(self.word_table, tokens),
            ops.rows(self.segment_table, segments),
        )
        return ops.add(out, ops.rows(self.position_table, positions))


def pooling_matrix(side: int, pool: int) -> np.ndarray:
    """Average-pool a side x side grid (row-major rows) into (side // pool)^2 cells."""
    out_side = side // pool
    matrix = np.zeros((out_side * out_side, side * side))
    for oi in range(out_side):
        for oj in range(out_side):
            for di in range(pool):
                for dj in range(pool):
                    src = (oi * pool + di) * side + (oj * pool + dj)
                    matrix[oi * out_side + oj, src] = 1.0 / (pool * pool)
    return matrix


def patch_index(image_size: int, kernel: int) -> np.ndarray:
    """Flat indices of every kernel x kernel patch (valid convolution, stride 1)."""
    side = image_size - kernel + 1
    idx = np.empty((side * side, kernel * kernel), dtype=np.int64)
    for i in range(side):
        for j in range(side):
            for ki in range(kernel):
                for kj in range(kernel):
                    idx[i * side + j, ki * kernel + kj] = (i + ki) * image_size + (j + kj)
    return idx


class ConvBackbone(Module):
    """One convolution + average pooling stage over a square grayscale grid."""

    def __init__(
        self,
        image_size: int,
        channels: int,
        kernel: int,
        pool: int,
        rng: np.random.Generator,
    ):
        self.image_size = image_size
        self.kernel = parameter((kernel * kernel, channels), rng)
        self.bias = parameter((1, channels), rng, init="zeros")
        self._patches = patch_index(image_size, kernel)
        conv_side = image_size - kernel + 1
        pool = min(pool, conv_side)
        self._pool = pooling_matrix(conv_side, pool)
        self.output_dim = self._pool.shape[0] * channels

    def __call__(self, image: Tensor) -> Tensor:
        patches = ops.take(image, self._patches)
        conv = ops.gelu(ops.add_bias(ops.matmul(patches, self.kernel), self.bias))
        pooled = ops.matmul(ops.constant(self._pool), conv)
        return ops.reshape(pooled, (1, self.output_dim))


class ImageProjector(Module):
    """Backbone stand-in followed by a three-layer perceptron into d_model."""

    def __init__(
        self,
        feature_dim: int,
        d_model: int,
        rng: np.random.Generator,
        backbone: Optional[ConvBackbone] = None,
    ):
        self.feature_dim = feature_dim
        self.d_model = d_model
        self.backbone = backbone
        mlp_in = backbone.output_dim if backbone is not None else feature_dim
        self.mlp = Mlp([mlp_in, d_model, d_model, d_model], rng, activate_last=True)

    def project_image(self, features: Tensor) -> Tensor:
        """
        Map one image feature vector to a single 1 x d_model token.

        Args:
            features: Tensor[D_img] or Tensor[1 x D_img]
        """
        if features.size != self.feature_dim or features.ndim > 2:
            raise DimensionError(
                f"image features must have length {self.feature_dim}",
                features.shape,
                (self.feature_dim,),
            )
        x = features if features.shape == (1, self.feature_dim) else ops.reshape(
            features, (1, self.feature_dim)
        )
        if self.backbone is not None:
            x = self.backbone(x)
        return self.mlp(x)


def assemble(
    image_tokens: Tensor,
    text_tokens: Tensor,
    cls_image: Tensor,
    cls_text: Tensor,
) -> MultimodalSequence:
    """
    Prepend each modality's CLS token and concatenate into one sequence.

    Args:
        image_tokens: Tensor[n_img x d] (n_img may be 0)
        text_tokens: Tensor[n_txt x d] (n_txt may be 0)
        cls_image: Tensor[d] or Tensor[1 x d]
        cls_text: Tensor[d] or Tensor[1 x d]
    """
    d = cls_image.shape[-1]
    parts: List[Tensor] = []
    for name, t in (
        ("cls_image", cls_image),
        ("image_tokens", image_tokens),
        ("cls_text", cls_text),
        ("text_tokens", text_tokens),
    ):
        if t.ndim == 1:
            t = ops.reshape(t, (1, t.shape[0]))
        check_width(f"assemble {name}", t.shape, d)
        parts.append(t)

    n_img, n_txt = parts[1].shape[0], parts[3].shape[0]
    tags = (
        (ModalityTag.IMAGE_CLS,)
        + (ModalityTag.IMAGE,) * n_img
        + (ModalityTag.TEXT_CLS,)
        + (ModalityTag.TEXT,) * n_txt
    )
    return MultimodalSequence(ops.concat_rows(parts), tags)
