"""
Seeded train/test partition (75% / 25% by default).

The split is stratified by label: every class contributes to the train side in
proportion to its size (largest remainder, ties to the lower label), so class
priors in both partitions track the dataset.
"""

import math
from collections import defaultdict
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from src.utils.exceptions import ContractError

from .records import Record


class SplitSpec(BaseModel):
    train_fraction: float = Field(default=0.75, gt=0.0, lt=1.0)
    seed: int = Field(default=0, ge=0)


def _class_quotas(sizes: Dict[int, int], n_train: int) -> Dict[int, int]:
    n = sum(sizes.values())
    exact = {label: n_train * size / n for label, size in sizes.items()}
    quotas = {label: math.floor(share) for label, share in exact.items()}
    leftover = n_train - sum(quotas.values())
    by_remainder = sorted(sizes, key=lambda label: (-(exact[label] - quotas[label]), label))
    for label in by_remainder[:leftover]:
        quotas[label] += 1
    return quotas


def split(
    records: Sequence[Record],
    spec: SplitSpec = SplitSpec(),
) -> Tuple[List[Record], List[Record]]:
    """
    Shuffle deterministically and cut into train and test partitions.

    |train| = floor(train_fraction * n), kept within [1, n - 1].
    """
    n = len(records)
    if n < 2:
        raise ContractError(f"split needs at least 2 records, got {n}")
    n_train = min(max(math.floor(spec.train_fraction * n), 1), n - 1)
    rng = np.random.default_rng(spec.seed)

    by_label: Dict[int, List[int]] = defaultdict(list)
    for i, record in enumerate(records):
        by_label[record.label].append(i)
    quotas = _class_quotas({label: len(idx) for label, idx in by_label.items()}, n_train)

    train_idx: List[int] = []
    test_idx: List[int] = []
    for label in sorted(by_label):
        members = rng.permutation(by_label[label])
        train_idx.extend(members[: quotas[label]])
        test_idx.extend(members[quotas[label] :])

    train = [records[i] for i in rng.permutation(train_idx)]
    test = [records[i] for i in rng.permutation(test_idx)]
    return train, test
