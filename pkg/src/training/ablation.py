"""
Ablation and robustness harnesses.

Every variant is trained and evaluated on the same split with the same seed.
Published reference numbers are carried as display-only rows flagged
`source=paper`; they are never compared against runs.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Literal, Optional, Sequence, Union

from loguru import logger
from pydantic import BaseModel, Field

from src.config.settings import ModelSettings, TrainingSettings
from src.data.records import Record
from src.data.splitting import SplitSpec, split
from src.models.embeddings import Modality
from src.models.fmt import FmtModel

from .evaluation import evaluate
from .metrics import REPORT_HEADER, MetricReport, accuracy, require_positives
from .trainer import train

ABLATION_HEADER = "model,accuracy,recall,f1,n_eval,source"

# (row name, model settings overrides, modality dropout override)
ABLATION_VARIANTS = [
    ("FMT", {"variant": "full"}, None),
    ("image-only", {"variant": "image_only"}, None),
    ("text-only", {"variant": "text_only"}, None),
    ("fusion-no-stack", {"variant": "fusion_no_stack"}, None),
    ("fusion-without-cnn", {"variant": "full", "use_conv_backbone": False}, None),
    ("no-masking", {"variant": "full"}, 0.0),
]


class AblationRow(BaseModel):
    """One line of the ablation table."""

    model: str
    accuracy: float = Field(ge=0.0, le=1.0)
    recall: float = Field(ge=0.0, le=1.0)
    f1: float = Field(ge=0.0, le=1.0)
    n_eval: Optional[int] = None
    source: Literal["run", "paper"] = "run"

    def csv_row(self) -> str:
        n_eval = "" if self.n_eval is None else str(self.n_eval)
        return (
            f"{self.model},{self.accuracy:.4f},{self.recall:.4f},{self.f1:.4f},"
            f"{n_eval},{self.source}"
        )


def _reference(model: str, acc: int, rec: int, f1_score: int) -> AblationRow:
    return AblationRow(
        model=model, accuracy=acc / 100, recall=rec / 100, f1=f1_score / 100, source="paper"
    )


# Published clinical results; not reproducible on synthetic data.
PUBLISHED_REFERENCE = [
    _reference("FMT", 94, 95, 93),
    _reference("ResNet", 89, 91, 86),
    _reference("BERT", 79, 85, 84),
    _reference("TextCNN", 88, 91, 86),
    _reference("RoBERTa", 81, 86, 85),
    _reference("BERT+ResNet-Without-CNN", 88, 86, 84),
    _reference("BERT+ResNet-NN", 89, 90, 84),
    _reference("CheXMed", 90, 91, 92),
]


def run_variant(
    name: str,
    train_records: Sequence[Record],
    test_records: Sequence[Record],
    model_settings: ModelSettings,
    train_settings: TrainingSettings,
) -> MetricReport:
    """Train one variant from scratch and score it on the test records."""
    model = FmtModel(model_settings)
    train(model, train_records, train_settings)
    counts = evaluate(model, test_records, max_workers=train_settings.max_workers)
    report = MetricReport.from_counts(name, counts)
    logger.info(f"{name}: accuracy={report.accuracy:.4f} recall={report.recall:.4f}")
    return report


def ablate(
    records: Sequence[Record],
    seed: int = 0,
    model_settings: Optional[ModelSettings] = None,
    train_settings: Optional[TrainingSettings] = None,
    train_fraction: float = 0.75,
    include_reference: bool = True,
) -> List[AblationRow]:
    """
    Train and evaluate every ablation variant under one split and seed.

    Args:
        records: Full dataset
        seed: Seed for the split, parameter initialization, shuffling and dropout
        model_settings: Base architecture (variant and backbone are overridden per row)
        train_settings: Base optimization settings
        train_fraction: Train share of the split
        include_reference: Append the published reference rows

    Returns:
        Run rows in a fixed order, then the reference rows
    """
    model_settings = model_settings or ModelSettings()
    train_settings = train_settings or TrainingSettings()
    spec = SplitSpec(train_fraction=train_fraction, seed=seed)
    train_records, test_records = split(records, spec)
    logger.info(
        f"Ablation seed={seed}: {len(train_records)} train / {len(test_records)} test records"
    )
    require_positives(
        (r.label for r in test_records), f"test split (seed {seed}, {len(test_records)} records)"
    )

    rows: List[AblationRow] = []
    for name, model_update, p_drop in ABLATION_VARIANTS:
        ms = model_settings.model_copy(update={**model_update, "init_seed": seed})
        update = {"seed": seed}
        if p_drop is not None:
            update["p_drop"] = p_drop
        ts = train_settings.model_copy(update=update)
        report = run_variant(name, train_records, test_records, ms, ts)
        rows.append(
            AblationRow(
                model=name,
                accuracy=report.accuracy,
                recall=report.recall,
                f1=report.f1,
                n_eval=report.n_eval,
            )
        )
    if include_reference:
        rows.extend(PUBLISHED_REFERENCE)
    return rows


def format_ablation_csv(rows: Iterable[AblationRow]) -> str:
    return "\n".join([ABLATION_HEADER, *(r.csv_row() for r in rows)]) + "\n"


def write_ablation_csv(rows: Iterable[AblationRow], path: Union[str, Path]) -> Path:
    """Write the ablation table; identical rows give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_ablation_csv(rows))
    logger.info(f"Wrote ablation table to {path}")
    return path


def append_report(report: MetricReport, path: Union[str, Path]) -> Path:
    """
    Append one row to an evaluation report.

    A new or empty file first receives the header `model,accuracy,recall,f1,n_eval`.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    new_file = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        if new_file:
            fh.write(REPORT_HEADER + "\n")
        fh.write(report.csv_row() + "\n")
    logger.info(f"Appended {report.model_name} to {path}")
    return path


@dataclass(frozen=True)
class RobustnessRow:
    """Mean accuracy with and without text for one dropout rate."""

    p_drop: float
    accuracy: float
    text_free_accuracy: float

    @property
    def drop(self) -> float:
        return self.accuracy - self.text_free_accuracy

    def csv_row(self) -> str:
        return (
            f"{self.p_drop:.4f},{self.accuracy:.4f},"
            f"{self.text_free_accuracy:.4f},{self.drop:.4f}"
        )


ROBUSTNESS_HEADER = "p_drop,accuracy,text_free_accuracy,drop"


def robustness(
    records: Sequence[Record],
    seeds: Sequence[int] = (0, 1, 2),
    p_drops: Sequence[float] = (0.0, 0.3),
    model_settings: Optional[ModelSettings] = None,
    train_settings: Optional[TrainingSettings] = None,
    train_fraction: float = 0.75,
) -> List[RobustnessRow]:
    """
    Measure how much accuracy each dropout rate loses when text is removed.

    For every seed the split is shared across dropout rates; one full model
    is trained per (seed, p_drop) and evaluated with and without text.

    Returns:
        One row per p_drop, averaged over seeds
    """
    model_settings = (model_settings or ModelSettings()).model_copy(update={"variant": "full"})
    train_settings = train_settings or TrainingSettings()
    totals = {p: [0.0, 0.0] for p in p_drops}
    for seed in seeds:
        train_records, test_records = split(
            records, SplitSpec(train_fraction=train_fraction, seed=seed)
        )
        for p in p_drops:
            model = FmtModel(model_settings.model_copy(update={"init_seed": seed}))
            ts = train_settings.model_copy(update={"seed": seed, "p_drop": p})
            train(model, train_records, ts)
            workers = train_settings.max_workers
            full = accuracy(evaluate(model, test_records, max_workers=workers))
            text_free = accuracy(
                evaluate(model, test_records, forced_drop=Modality.TEXT, max_workers=workers)
            )
            logger.info(f"seed={seed} p_drop={p}: accuracy={full:.4f} text-free={text_free:.4f}")
            totals[p][0] += full
            totals[p][1] += text_free

    n = len(seeds)
    return [RobustnessRow(p, totals[p][0] / n, totals[p][1] / n) for p in p_drops]
