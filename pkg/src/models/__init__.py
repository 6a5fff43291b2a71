"""Models module initialization."""

from .embeddings import (
    ConvBackbone,
    ImageProjector,
    Modality,
    ModalityTag,
    MultimodalSequence,
    TextEmbedder,
    assemble,
)
from .encoder import (
    AttentionMask,
    DropoutPolicy,
    EncoderConfig,
    MaskedEncoder,
    MultiHeadAttention,
    Task,
    attention,
    build_mask,
    encoder_forward,
    sample_dropout,
)
from .fmt import FmtModel, FmtOutput
from .moe import (
    AbsentEmbedding,
    ExpertLayer,
    FusionLayer,
    GatingGru,
    GruCell,
    StackedExperts,
    expert_layer_forward,
    gate_and_classify,
    interpolate_resize,
    stack_forward,
)

__all__ = [
    "Modality",
    "ModalityTag",
    "MultimodalSequence",
    "TextEmbedder",
    "ImageProjector",
    "ConvBackbone",
    "assemble",
    "AttentionMask",
    "DropoutPolicy",
    "EncoderConfig",
    "MaskedEncoder",
    "MultiHeadAttention",
    "Task",
    "attention",
    "build_mask",
    "encoder_forward",
    "sample_dropout",
    "AbsentEmbedding",
    "FusionLayer",
    "ExpertLayer",
    "StackedExperts",
    "GruCell",
    "GatingGru",
    "interpolate_resize",
    "expert_layer_forward",
    "stack_forward",
    "gate_and_classify",
    "FmtModel",
    "FmtOutput",
]
