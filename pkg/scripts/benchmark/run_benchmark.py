#!/usr/bin/env python
"""
Ablation benchmark over several seeds.

Generates a synthetic dataset at the chosen noise level, runs the ablation
once per seed and logs the mean accuracy/recall/F1 of every variant.
"""

import argparse
import sys
from pathlib import Path
from typing import Dict, List

# Add project root to path
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from loguru import logger  # noqa: E402
from tqdm import tqdm  # noqa: E402

from config import LOGS_DIR, REPORTS_DIR, SMALL_MODEL_CONFIG, TRAIN_CONFIG  # noqa: E402
from src.config.settings import load_settings  # noqa: E402
from src.data.generator import generate  # noqa: E402
from src.training.ablation import AblationRow, ablate, write_ablation_csv  # noqa: E402
from src.utils.logger import setup_logger  # noqa: E402


def mean_rows(runs: List[List[AblationRow]]) -> List[AblationRow]:
    """Average run rows of the same model across seeds, keeping row order."""
    totals: Dict[str, List[float]] = {}
    n_eval: Dict[str, int] = {}
    for rows in runs:
        for r in rows:
            acc = totals.setdefault(r.model, [0.0, 0.0, 0.0])
            acc[0] += r.accuracy
            acc[1] += r.recall
            acc[2] += r.f1
            n_eval[r.model] = n_eval.get(r.model, 0) + (r.n_eval or 0)
    n = len(runs)
    return [
        AblationRow(
            model=name,
            accuracy=a / n,
            recall=rec / n,
            f1=f / n,
            n_eval=n_eval[name],
        )
        for name, (a, rec, f) in totals.items()
    ]


def main():
    """Main benchmark function."""
    parser = argparse.ArgumentParser(description="Run the FMT ablation over several seeds")
    parser.add_argument("--noise", type=float, default=0.6, help="Image noise scale")
    parser.add_argument("--n", type=int, default=200, help="Records to generate")
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--epochs", type=int, default=None, help="Override training epochs")
    parser.add_argument("--out", type=Path, default=REPORTS_DIR / "benchmark.csv")
    args = parser.parse_args()

    setup_logger("INFO", log_file=LOGS_DIR / "benchmark.log")
    settings = load_settings(
        TRAIN_CONFIG,
        SMALL_MODEL_CONFIG,
        overrides={
            "data": {"noise": args.noise, "n": args.n},
            "training": {"epochs": args.epochs, "show_progress": False},
        },
    )

    logger.info("=" * 60)
    logger.info("FMT Desk - Ablation Benchmark")
    logger.info("=" * 60)
    logger.info(f"noise={args.noise}, n={args.n}, seeds={args.seeds}")

    records = generate(settings.data)
    runs: List[List[AblationRow]] = []
    for seed in tqdm(args.seeds, desc="Seeds"):
        runs.append(
            ablate(
                records,
                seed=seed,
                model_settings=settings.model,
                train_settings=settings.training,
                train_fraction=settings.data.train_fraction,
                include_reference=False,
            )
        )

    summary = mean_rows(runs)
    write_ablation_csv(summary, args.out)

    # Print summary
    logger.info("")
    logger.info("=" * 60)
    logger.info(f"Mean over {len(runs)} seeds")
    logger.info("=" * 60)
    for row in summary:
        logger.info(
            f"{row.model:<16} accuracy={row.accuracy:.4f} "
            f"recall={row.recall:.4f} f1={row.f1:.4f}"
        )

    by_name = {r.model: r.accuracy for r in summary}
    ordered = by_name["FMT"] >= by_name["image-only"] >= by_name["text-only"]
    logger.info("")
    logger.info(f"FMT >= image-only >= text-only: {ordered}")
    logger.info(f"FMT >= fusion-no-stack: {by_name['FMT'] >= by_name['fusion-no-stack']}")
    logger.info(f"Summary written to {args.out}")


if __name__ == "__main__":
    main()
