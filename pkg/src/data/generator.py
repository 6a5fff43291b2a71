"""
Synthetic pneumonia-like multimodal dataset.

Images are small grayscale grids built from a per-class template plus
Gaussian noise; texts are token draws from per-class categorical
distributions that overlap, so text carries signal but less than images.
Every record draws from its own stream seeded by (seed, index), so
generation is a pure function of the settings.
"""

from typing import List

import numpy as np
from loguru import logger

from src.config.settings import DataSettings

from .records import Record

PAD_TOKEN = 0
BACKGROUND = 0.3
MOTIF = 0.7
TEXT_BOOST = 2.0


def _motif(kind: int, side: int) -> np.ndarray:
    """Boolean mask of the geometric motif used by class kind + 1."""
    yy, xx = np.mgrid[0:side, 0:side]
    centre = (side - 1) / 2.0
    radius = side / 5.0
    shapes = [
        (yy - centre) ** 2 + (xx - centre) ** 2 <= radius**2,  # centred disc ("opacity")
        np.abs(yy - centre) <= side / 8.0,  # horizontal band
        np.abs(xx - centre) <= side / 8.0,  # vertical band
        np.abs(np.sqrt((yy - centre) ** 2 + (xx - centre) ** 2) - side / 3.0) <= 1.0,  # ring
        np.abs(yy - xx) <= 1,  # diagonal
    ]
    return shapes[kind % len(shapes)]


def class_template(label: int, side: int) -> np.ndarray:
    """
    Noise-free grid for a class, flattened row-major.

    Class 0 is a uniform low-intensity grid; class c >= 1 adds motif c - 1.
    """
    grid = np.full((side, side), BACKGROUND)
    if label > 0:
        kind = label - 1
        # Beyond the motif list, repeat motifs at a different intensity.
        level = MOTIF if kind < 5 else (MOTIF + 1.0) / 2.0
        grid[_motif(kind, side)] = level
    return grid.reshape(-1)


def token_distribution(label: int, vocab: int, num_classes: int) -> np.ndarray:
    """
    Categorical distribution over token ids for a class.

    Token 0 is reserved for padding. Each class boosts its own block of ids;
    the remaining ids (including other classes' blocks) keep a base weight,
    so distributions overlap.
    """
    weights = np.zeros(vocab)
    weights[1:] = 1.0
    block = max(1, (vocab - 1) // (2 * num_classes))
    start = 1 + label * block
    weights[start : start + block] *= TEXT_BOOST
    return weights / weights.sum()


def generate_record(index: int, label: int, config: DataSettings) -> Record:
    """Build one record from its own (seed, index) random stream."""
    rng = np.random.default_rng([config.seed, index])
    side = config.image_size

    template = class_template(label, side)
    image = np.clip(template + config.noise * rng.standard_normal(template.shape), 0.0, 1.0)

    probs = token_distribution(label, config.vocab, config.num_classes)
    text = rng.choice(config.vocab, size=config.text_len, p=probs)
    if config.text_dropout > 0.0:
        corrupted = rng.random(config.text_len) < config.text_dropout
        text = np.where(corrupted, PAD_TOKEN, text)

    has_image, has_text = True, True
    if rng.random() < config.missing_rate:
        if rng.random() < 0.5:
            has_image = False
        else:
            has_text = False

    return Record(
        id=f"rec-{index:05d}",
        label=label,
        image=[float(x) for x in image] if has_image else None,
        text=[int(t) for t in text] if has_text else None,
        has_image=has_image,
        has_text=has_text,
    )


def generate(config: DataSettings) -> List[Record]:
    """
    Generate a class-balanced synthetic dataset.

    Labels cycle 0, 1, ..., C-1 so class counts differ by at most one.

    Args:
        config: Generation settings

    Returns:
        List of records in index order
    """
    block = max(1, (config.vocab - 1) // (2 * config.num_classes))
    if 1 + config.num_classes * block > config.vocab:
        logger.warning("Vocabulary too small for disjoint class token blocks")
    records = [
        generate_record(i, i % config.num_classes, config) for i in range(config.n)
    ]
    missing = sum(1 for r in records if not (r.has_image and r.has_text))
    logger.info(
        f"Generated {len(records)} records (seed={config.seed}, noise={config.noise}, "
        f"{missing} missing one modality)"
    )
    return records
