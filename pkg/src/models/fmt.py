"""
The Flexible Multimodal Transformer: embedding, three masked encoder passes
sharing one set of weights, and the stacking mixture-of-experts head.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from src.autograd import ops
from src.autograd.tensor import Tensor, current_tape
from src.config.settings import ModelSettings
from src.utils.exceptions import ConfigError

from .embeddings import (
    ConvBackbone,
    ImageProjector,
    Modality,
    MultimodalSequence,
    TextEmbedder,
    assemble,
)
from .encoder import (
    TASK_ORDER,
    DropSpec,
    EncoderConfig,
    MaskedEncoder,
    Task,
    as_drop_set,
    build_mask,
    encoder_forward,
)
from .layers import Linear, Module, parameter
from .moe import AbsentEmbedding, FusionLayer, GatingGru, StackedExperts

VARIANT_SLOTS = {
    "full": TASK_ORDER,
    "fusion_no_stack": TASK_ORDER,
    "image_only": (Task.IMAGE_ONLY,),
    "text_only": (Task.TEXT_ONLY,),
}


@dataclass
class FmtOutput:
    """Everything one forward pass produces; probs is the prediction."""

    probs: Tensor
    logits: Tensor
    task_outputs: List[Optional[Tensor]]
    fused: Tensor
    layer_outputs: List[Tensor]


class FmtModel(Module):
    """All FMT parameters plus the hyperparameters that shaped them."""

    def __init__(self, settings: Optional[ModelSettings] = None):
        """
        Build and initialize a model.

        Args:
            settings: Architecture hyperparameters (defaults to ModelSettings())
        """
        self.settings = settings or ModelSettings()
        s = self.settings
        rng = np.random.default_rng(s.init_seed)

        self.text = TextEmbedder(s.vocab_size, s.d_model, s.max_len, rng)
        backbone = (
            ConvBackbone(s.image_size, s.conv_channels, s.conv_kernel, s.pool_size, rng)
            if s.use_conv_backbone
            else None
        )
        self.image = ImageProjector(s.image_dim, s.d_model, rng, backbone=backbone)
        self.cls_image = parameter((1, s.d_model), rng, init="normal")
        self.cls_text = parameter((1, s.d_model), rng, init="normal")

        self.encoder_config = EncoderConfig(s.d_model, s.n_heads, s.n_layers, s.ff_width)
        self.encoder = MaskedEncoder(self.encoder_config, rng)

        width = s.expert_width
        self.fusion = FusionLayer(s.d_model, s.fusion_widths, rng)
        self.absent = AbsentEmbedding(width, rng)
        self.stack = StackedExperts(width, s.n_experts, rng, activation=s.expert_activation)
        self.gate = GatingGru(width, s.gru_hidden, s.num_classes, rng)
        self.direct_head = Linear(width, s.num_classes, rng)
        self.aux_heads: List[Linear] = [
            Linear(width, s.num_classes, rng) for _ in TASK_ORDER
        ]

        logger.info(
            f"Built FMT ({s.variant}): d_model={s.d_model}, layers={s.n_layers}, "
            f"heads={s.n_heads}, experts={s.n_experts}, "
            f"{sum(p.size for p in self.parameters())} parameters"
        )

    @property
    def variant(self) -> str:
        return self.settings.variant

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters().items()}

    def sequence(
        self,
        image: Optional[np.ndarray],
        tokens: Optional[Sequence[int]],
    ) -> MultimodalSequence:
        """
        Embed one sample into the composite sequence.

        Text positions index the composite sequence, so the first text token
        sits at position n_img + 2.
        """
        d = self.settings.d_model
        if image is not None:
            image_tokens = self.image.project_image(ops.constant(np.asarray(image).reshape(1, -1)))
        else:
            image_tokens = ops.constant(np.zeros((0, d)))
        offset = image_tokens.shape[0] + 2
        if tokens is not None and len(tokens) > 0:
            text_tokens = self.text.embed_text(tokens, offset=offset)
        else:
            text_tokens = ops.constant(np.zeros((0, d)))
        return assemble(image_tokens, text_tokens, self.cls_image, self.cls_text)

    def task_output(
        self,
        seq: MultimodalSequence,
        task: Task,
        dropped: DropSpec = None,
    ) -> Optional[Tensor]:
        """
        Run one encoder pass and pool its permitted CLS vectors.

        Returns None when the task's modality (or, for Joint, every modality)
        is dropped.
        """
        gone = as_drop_set(dropped)
        permitted = [
            m
            for m in (Modality.IMAGE, Modality.TEXT)
            if m not in gone and (task.modality is None or task.modality == m)
        ]
        if not permitted:
            return None
        encoded = encoder_forward(seq, build_mask(seq.modality_tags, task, gone), self.encoder)
        return ops.mean_rows(ops.rows(encoded, [seq.cls_index(m) for m in permitted]))

    def task_outputs(
        self,
        seq: MultimodalSequence,
        dropped: DropSpec = None,
        parallel: bool = False,
    ) -> List[Optional[Tensor]]:
        """
        Outputs of the Joint, ImageOnly and TextOnly passes in slot order.

        Slots the variant does not use are None. Passes run concurrently only
        when no tape is recording.
        """
        active = VARIANT_SLOTS[self.variant]
        tasks = [t if t in active else None for t in TASK_ORDER]

        def run(task: Optional[Task]) -> Optional[Tensor]:
            return None if task is None else self.task_output(seq, task, dropped)

        if parallel and current_tape() is None:
            with ThreadPoolExecutor(max_workers=len(tasks)) as pool:
                return list(pool.map(run, tasks))
        return [run(t) for t in tasks]

    def forward(
        self,
        image: Optional[np.ndarray],
        tokens: Optional[Sequence[int]],
        dropped: DropSpec = None,
        parallel: bool = False,
    ) -> FmtOutput:
        """
        Classify one sample.

        Args:
            image: Flattened grayscale grid, or None when missing
            tokens: Text token ids, or None when missing
            dropped: Modality (or modalities) to mask out for this pass
            parallel: Run the three task passes concurrently (evaluation only)

        Returns:
            FmtOutput with the class probability row
        """
        gone = set(as_drop_set(dropped))
        if image is None:
            gone.add(Modality.IMAGE)
        if tokens is None or len(tokens) == 0:
            gone.add(Modality.TEXT)

        seq = self.sequence(image, tokens)
        outputs = self.task_outputs(seq, gone, parallel=parallel)
        fused = self.fusion.fuse(outputs, self.absent)

        if self.variant == "full":
            layer_outputs = self.stack(fused)
            logits, probs = self.gate(layer_outputs)
            return FmtOutput(probs, logits, outputs, fused, layer_outputs)

        if self.variant == "fusion_no_stack":
            pooled = ops.mean_rows(fused)
        else:
            slot = TASK_ORDER.index(VARIANT_SLOTS[self.variant][0])
            pooled = ops.rows(fused, [slot])
        logits = self.direct_head(pooled)
        return FmtOutput(ops.softmax_rows(logits), logits, outputs, fused, [])

    __call__ = forward

    def check_compatible(self, image_dim: int, vocab: int, text_len: int, num_classes: int) -> None:
        """Raise ConfigError when data dimensions do not fit this model."""
        s = self.settings
        problems = []
        if image_dim != s.image_dim:
            problems.append(f"image length {image_dim} != model image_dim {s.image_dim}")
        if vocab > s.vocab_size:
            problems.append(f"data vocabulary {vocab} exceeds model vocab_size {s.vocab_size}")
        if text_len + 3 > s.max_len:
            problems.append(f"text length {text_len} needs max_len >= {text_len + 3}")
        if num_classes > s.num_classes:
            problems.append(f"data has {num_classes} classes, model has {s.num_classes}")
        if problems:
            raise ConfigError("; ".join(problems))
