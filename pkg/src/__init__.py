"""
FMT Desk - Flexible Multimodal Transformer at desk scale

A self-contained reimplementation of a multimodal classifier that fuses a
grayscale image and a short token sequence, and keeps working when one of
them is missing.

Architecture:
- NumPy reverse-mode autograd (tape, ops, Adam)
- Transformer encoder with modality-aware attention masks
- Stacking mixture-of-experts head gated by a two-cell GRU
- Synthetic pneumonia-like dataset, training, evaluation and ablation
"""

__version__ = "0.1.0"
__author__ = "FMT Desk Team"
