"""
Frozen-model prediction and evaluation.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from src.data.records import Record
from src.models.embeddings import Modality
from src.models.fmt import FmtModel
from src.utils.exceptions import ContractError

from .metrics import ConfusionCounts, tally


@dataclass(frozen=True)
class Prediction:
    record_id: str
    label: int
    prediction: int
    probs: Tuple[float, ...]


def model_inputs(record: Record) -> Tuple[Optional[np.ndarray], Optional[List[int]]]:
    """Image array and token list of a record, None where the modality is missing."""
    image = np.asarray(record.image, dtype=np.float64) if record.has_image else None
    tokens = list(record.text) if record.has_text else None
    return image, tokens


def predict_one(
    model: FmtModel,
    record: Record,
    forced_drop: Optional[Modality] = None,
) -> Prediction:
    """Classify one record; argmax ties go to the lowest class index."""
    image, tokens = model_inputs(record)
    out = model(image, tokens, dropped=forced_drop)
    probs = out.probs.data[0]
    return Prediction(
        record_id=record.id,
        label=record.label,
        prediction=int(np.argmax(probs)),
        probs=tuple(float(p) for p in probs),
    )


def predict(
    model: FmtModel,
    records: Sequence[Record],
    forced_drop: Optional[Modality] = None,
    max_workers: int = 1,
) -> List[Prediction]:
    """
    Predict every record, in input order.

    Args:
        model: Trained model (not modified)
        records: Records to classify
        forced_drop: Modality masked out for every record
        max_workers: Threads used across records

    Returns:
        One Prediction per record
    """
    if max_workers < 1:
        raise ContractError(f"max_workers must be >= 1, got {max_workers}")
    if forced_drop is not None:
        other = Modality.TEXT if forced_drop == Modality.IMAGE else Modality.IMAGE
        stranded = sum(
            1 for r in records if not (r.has_text if other == Modality.TEXT else r.has_image)
        )
        if stranded:
            logger.warning(
                f"{stranded} records have no {other.value} modality; "
                f"with {forced_drop.value} dropped they see no input at all"
            )

    if max_workers == 1 or len(records) < 2:
        return [predict_one(model, r, forced_drop) for r in records]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda r: predict_one(model, r, forced_drop), records))


def evaluate(
    model: FmtModel,
    records: Sequence[Record],
    forced_drop: Optional[Modality] = None,
    max_workers: int = 1,
) -> ConfusionCounts:
    """Confusion counts of the model's predictions against record labels."""
    predictions = predict(model, records, forced_drop, max_workers)
    counts = tally((p.label, p.prediction) for p in predictions)
    logger.debug(
        f"Evaluated {counts.n} records (forced_drop="
        f"{forced_drop.value if forced_drop else None}): {counts}"
    )
    return counts


def write_predictions(predictions: Sequence[Prediction], path: Union[str, Path]) -> Path:
    """Dump `id,label,prediction` lines so metrics can be re-tallied elsewhere."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id,label,prediction\n")
        for p in predictions:
            fh.write(f"{p.record_id},{p.label},{p.prediction}\n")
    return path
