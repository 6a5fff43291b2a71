"""
Command-line interface for FMT Desk.

Standard output carries machine-parsable lines only (4-decimal numerics);
logs, progress bars and rich tables go to stderr.

Exit codes: 0 success, 1 validation/format/IO error, 2 usage error.
"""

import argparse
import math
import sys
from collections import Counter
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from loguru import logger
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from src.config.settings import ModelSettings, Settings, load_settings
from src.data import dataset_io
from src.data.generator import generate
from src.models.embeddings import Modality, ModalityTag
from src.models.encoder import Task, build_mask
from src.models.fmt import FmtModel
from src.training.ablation import (
    ROBUSTNESS_HEADER,
    AblationRow,
    ablate,
    append_report,
    format_ablation_csv,
    robustness,
    write_ablation_csv,
)
from src.training.checkpoint import load_checkpoint, save_checkpoint
from src.training.evaluation import predict, write_predictions
from src.training.metrics import REPORT_HEADER, MetricReport, require_positives, tally
from src.training.trainer import check_data_fits, train
from src.utils.exceptions import ConfigError, FmtError
from src.utils.logger import setup_logger

console = Console(stderr=True)

VARIANT_NAMES = {
    "full": "FMT",
    "image_only": "image-only",
    "text_only": "text-only",
    "fusion_no_stack": "fusion-no-stack",
}

TAG_LEGEND = {
    ModalityTag.IMAGE_CLS: "I",
    ModalityTag.IMAGE: "i",
    ModalityTag.TEXT_CLS: "T",
    ModalityTag.TEXT: "t",
}

# flag dest -> (settings section, field)
MODEL_FLAGS = {
    "d_model": ("model", "d_model"),
    "n_heads": ("model", "n_heads"),
    "n_layers": ("model", "n_layers"),
    "n_experts": ("model", "n_experts"),
    "gru_hidden": ("model", "gru_hidden"),
    "variant": ("model", "variant"),
}
TRAINING_FLAGS = {
    "epochs": ("training", "epochs"),
    "batch_size": ("training", "batch_size"),
    "lr": ("training", "lr"),
    "p_drop": ("training", "p_drop"),
    "seed": ("training", "seed"),
    "aux_loss_weight": ("training", "aux_loss_weight"),
    "workers": ("training", "max_workers"),
}
DATA_FLAGS = {
    "n": ("data", "n"),
    "data_seed": ("data", "seed"),
    "noise": ("data", "noise"),
    "missing_rate": ("data", "missing_rate"),
    "text_dropout": ("data", "text_dropout"),
    "vocab": ("data", "vocab"),
    "text_len": ("data", "text_len"),
    "num_classes": ("data", "num_classes"),
    "image_size": ("data", "image_size"),
}


# ---------------------------------------------------------------------------
# Argument types
# ---------------------------------------------------------------------------


def positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {value}")
    return n


def nonnegative_int(value: str) -> int:
    n = int(value)
    if n < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {value}")
    return n


def probability(value: str) -> float:
    p = float(value)
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {value}")
    return p


def open_unit(value: str) -> float:
    p = float(value)
    if not 0.0 <= p < 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1), got {value}")
    return p


def nonnegative_float(value: str) -> float:
    x = float(value)
    if not x >= 0.0:
        raise argparse.ArgumentTypeError(f"expected a value >= 0, got {value}")
    return x


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _settings(args: argparse.Namespace, flags: Dict[str, Any]) -> Settings:
    overrides: Dict[str, Dict[str, Any]] = {}
    for dest, (section, field) in flags.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides.setdefault(section, {})[field] = value
    files = [args.config] if args.config else []
    return load_settings(*files, overrides=overrides)


def _fit_model_settings(settings: Settings, records) -> Settings:
    """Size the image input and class count of the model from the data."""
    image_lengths = {len(r.image) for r in records if r.image is not None}
    update: Dict[str, Any] = {}
    if len(image_lengths) == 1:
        length = image_lengths.pop()
        side = math.isqrt(length)
        if side * side != length:
            raise ConfigError(f"image length {length} is not a square grid")
        update["image_size"] = side
    labels = {r.label for r in records}
    if labels:
        update["num_classes"] = max(settings.model.num_classes, max(labels) + 1)
    try:
        model = ModelSettings(**{**settings.model.model_dump(), **update})
    except ValidationError as e:
        raise ConfigError(f"model settings do not fit the data: {e}") from e
    return settings.model_copy(update={"model": model})


def _print(line: str) -> None:
    sys.stdout.write(line + "\n")
    sys.stdout.flush()


def _ablation_table(rows: Sequence[AblationRow], title: str) -> Table:
    table = Table(title=title)
    table.add_column("Model", style="cyan")
    table.add_column("Accuracy", justify="right")
    table.add_column("Recall", justify="right")
    table.add_column("F1", justify="right")
    table.add_column("Source", style="dim")
    for r in rows:
        table.add_row(r.model, f"{r.accuracy:.4f}", f"{r.recall:.4f}", f"{r.f1:.4f}", r.source)
    return table


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_gen_data(args: argparse.Namespace) -> int:
    settings = _settings(args, DATA_FLAGS)
    records = generate(settings.data)
    dataset_io.save(records, args.out)
    _print(f"records,{len(records)}")
    histogram = Counter(r.label for r in records)
    for label in sorted(histogram):
        _print(f"class,{label},{histogram[label]}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    settings = _settings(args, {**MODEL_FLAGS, **TRAINING_FLAGS})
    records = dataset_io.load(args.data)
    if not records:
        raise ConfigError(f"dataset {args.data} is empty")
    settings = _fit_model_settings(settings, records)
    training = settings.training.model_copy(update={"show_progress": sys.stderr.isatty()})

    model = FmtModel(settings.model)
    result = train(model, records, training)
    for i, loss in enumerate(result.loss_log):
        _print(f"epoch,{i},loss,{loss:.4f}")
    _print(f"train_accuracy,{result.train_accuracy:.4f}")
    save_checkpoint(model, args.out, result.optimizer_state if args.save_optimizer else None)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    settings = _settings(args, {"workers": ("training", "max_workers")})
    model, _ = load_checkpoint(args.model)
    records = dataset_io.load(args.data, image_dim=model.settings.image_dim)
    check_data_fits(model, records)
    require_positives((r.label for r in records), f"evaluation set {args.data}")

    forced = Modality.TEXT if args.drop_text else Modality.IMAGE if args.drop_image else None
    predictions = predict(model, records, forced, max_workers=settings.training.max_workers)
    counts = tally((p.label, p.prediction) for p in predictions)
    name = VARIANT_NAMES[model.variant] + (f"+drop-{forced.value}" if forced else "")
    report = MetricReport.from_counts(name, counts)

    append_report(report, args.report)

    if args.predictions:
        write_predictions(predictions, args.predictions)

    _print(REPORT_HEADER)
    _print(report.csv_row())
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    settings = _settings(args, {**MODEL_FLAGS, **TRAINING_FLAGS})
    records = dataset_io.load(args.data)
    settings = _fit_model_settings(settings, records)
    training = settings.training.model_copy(update={"show_progress": False})
    seed = args.seed if args.seed is not None else settings.training.seed

    rows = ablate(
        records,
        seed=seed,
        model_settings=settings.model,
        train_settings=training,
        train_fraction=settings.data.train_fraction,
    )
    write_ablation_csv(rows, args.out)
    sys.stdout.write(format_ablation_csv(rows))
    console.print(_ablation_table(rows, f"Ablation (seed {seed})"))
    return 0


def cmd_robustness(args: argparse.Namespace) -> int:
    settings = _settings(args, {**MODEL_FLAGS, **TRAINING_FLAGS})
    records = dataset_io.load(args.data)
    settings = _fit_model_settings(settings, records)
    training = settings.training.model_copy(update={"show_progress": False})

    rows = robustness(
        records,
        seeds=args.seeds,
        p_drops=args.p_drops,
        model_settings=settings.model,
        train_settings=training,
        train_fraction=settings.data.train_fraction,
    )
    lines = [ROBUSTNESS_HEADER, *(r.csv_row() for r in rows)]
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    for line in lines:
        _print(line)
    return 0


def cmd_mask_demo(args: argparse.Namespace) -> int:
    tags = (
        [ModalityTag.IMAGE_CLS]
        + [ModalityTag.IMAGE] * args.n_img
        + [ModalityTag.TEXT_CLS]
        + [ModalityTag.TEXT] * args.n_txt
    )
    dropped = [Modality(m) for m in (args.drop or [])]
    mask = build_mask(tags, Task(args.task), dropped)
    _print("".join(TAG_LEGEND[t] for t in tags))
    for row in mask.render():
        _print(row)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model")
    g.add_argument("--d-model", type=positive_int, help="Embedding width")
    g.add_argument("--n-heads", type=positive_int, help="Attention heads")
    g.add_argument("--n-layers", type=positive_int, help="Encoder layers")
    g.add_argument("--n-experts", type=positive_int, help="Experts per stacked layer")
    g.add_argument("--gru-hidden", type=positive_int, help="GRU hidden units")
    g.add_argument("--variant", choices=sorted(VARIANT_NAMES), help="Head variant")


def _add_training_flags(p: argparse.ArgumentParser, with_seed: bool = True) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--epochs", type=positive_int, help="Training epochs")
    g.add_argument("--batch-size", type=positive_int, help="Samples per Adam step")
    g.add_argument("--lr", type=nonnegative_float, help="Adam learning rate")
    g.add_argument("--p-drop", type=probability, help="Modality dropout rate in [0, 1]")
    g.add_argument("--aux-loss-weight", type=nonnegative_float, help="Per-task auxiliary loss")
    g.add_argument("--workers", type=positive_int, help="Evaluation threads")
    if with_seed:
        g.add_argument("--seed", type=nonnegative_int, help="Training seed")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML/JSON settings file")
    common.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Log level for stderr",
    )

    parser = argparse.ArgumentParser(
        prog="fmt-desk",
        description="Flexible Multimodal Transformer: data, training, evaluation, ablation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="Generate a synthetic dataset")
    p.add_argument("--out", required=True, help="Output JSONL path")
    p.add_argument("--n", type=positive_int, help="Record count")
    p.add_argument("--seed", dest="data_seed", type=nonnegative_int, help="Generation seed")
    p.add_argument("--noise", type=nonnegative_float, help="Image noise scale")
    p.add_argument("--missing-rate", type=open_unit, help="Single-modality loss rate")
    p.add_argument("--text-dropout", type=open_unit, help="Per-token corruption rate")
    p.add_argument("--vocab", type=positive_int, help="Vocabulary size")
    p.add_argument("--text-len", type=positive_int, help="Tokens per record")
    p.add_argument("--num-classes", type=positive_int, help="Class count")
    p.add_argument("--image-size", type=positive_int, help="Image grid side")
    p.set_defaults(handler=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="Train a model")
    p.add_argument("--data", required=True, help="Training dataset")
    p.add_argument("--out", required=True, help="Checkpoint path")
    p.add_argument(
        "--save-optimizer", action="store_true", help="Store Adam state in the checkpoint"
    )
    _add_model_flags(p)
    _add_training_flags(p)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="Evaluate a checkpoint")
    p.add_argument("--model", required=True, help="Checkpoint path")
    p.add_argument("--data", required=True, help="Evaluation dataset")
    p.add_argument("--report", required=True, help="Metric report CSV (rows are appended)")
    p.add_argument("--predictions", help="Write per-record predictions to this CSV")
    p.add_argument("--workers", type=positive_int, help="Evaluation threads")
    drop = p.add_mutually_exclusive_group()
    drop.add_argument("--drop-text", action="store_true", help="Mask text for every record")
    drop.add_argument("--drop-image", action="store_true", help="Mask images for every record")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("ablate", parents=[common], help="Run the ablation table")
    p.add_argument("--data", required=True, help="Dataset")
    p.add_argument("--out", required=True, help="Ablation CSV path")
    _add_model_flags(p)
    _add_training_flags(p)
    p.set_defaults(handler=cmd_ablate)

    p = sub.add_parser("robustness", parents=[common], help="Text-free robustness sweep")
    p.add_argument("--data", required=True, help="Dataset")
    p.add_argument("--out", help="Optional CSV path")
    p.add_argument("--seeds", type=nonnegative_int, nargs="+", default=[0, 1, 2])
    p.add_argument("--p-drops", type=probability, nargs="+", default=[0.0, 0.3])
    _add_model_flags(p)
    _add_training_flags(p, with_seed=False)
    p.set_defaults(handler=cmd_robustness)

    p = sub.add_parser("mask-demo", parents=[common], help="Print an attention mask grid")
    p.add_argument("--n-img", type=nonnegative_int, default=2, help="Image tokens")
    p.add_argument("--n-txt", type=nonnegative_int, default=2, help="Text tokens")
    p.add_argument("--task", choices=[t.value for t in Task], default=Task.JOINT.value)
    p.add_argument(
        "--drop", choices=[m.value for m in Modality], action="append", help="Dropped modality"
    )
    p.set_defaults(handler=cmd_mask_demo)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, run one subcommand, and return its exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logger(args.log_level)

    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except FmtError as e:
        logger.error(f"{args.command} failed: {e}")
        console.print(f"[red]error:[/red] {e}")
        return 1
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        console.print(f"[red]error:[/red] {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
