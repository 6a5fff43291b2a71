"""Synthetic data module initialization."""

from .dataset_io import load, parse_line, save
from .generator import PAD_TOKEN, class_template, generate, generate_record, token_distribution
from .records import Record
from .splitting import SplitSpec, split

__all__ = [
    "Record",
    "generate",
    "generate_record",
    "class_template",
    "token_distribution",
    "PAD_TOKEN",
    "save",
    "load",
    "parse_line",
    "SplitSpec",
    "split",
]
