"""Training, evaluation, checkpointing and ablation."""

from .ablation import (
    ABLATION_HEADER,
    PUBLISHED_REFERENCE,
    ROBUSTNESS_HEADER,
    AblationRow,
    RobustnessRow,
    ablate,
    append_report,
    format_ablation_csv,
    robustness,
    write_ablation_csv,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .evaluation import Prediction, evaluate, predict, write_predictions
from .metrics import (
    REPORT_HEADER,
    ConfusionCounts,
    MetricReport,
    accuracy,
    f1,
    precision,
    recall,
    require_positives,
    tally,
)
from .trainer import TrainResult, train

__all__ = [
    "ConfusionCounts",
    "MetricReport",
    "REPORT_HEADER",
    "tally",
    "accuracy",
    "recall",
    "precision",
    "f1",
    "require_positives",
    "Prediction",
    "predict",
    "evaluate",
    "write_predictions",
    "TrainResult",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "AblationRow",
    "ABLATION_HEADER",
    "ROBUSTNESS_HEADER",
    "PUBLISHED_REFERENCE",
    "RobustnessRow",
    "ablate",
    "robustness",
    "format_ablation_csv",
    "write_ablation_csv",
    "append_report",
]
