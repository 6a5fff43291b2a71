#!/usr/bin/env python
"""
Project initialization script.

Creates the working directories, checks that the bundled configuration files
load and build a model, and writes a default synthetic dataset.
"""

import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from loguru import logger  # noqa: E402

from config import MODEL_CONFIG, SMALL_MODEL_CONFIG, TRAIN_CONFIG  # noqa: E402
from src.config.settings import get_settings, load_settings  # noqa: E402
from src.data import dataset_io  # noqa: E402
from src.data.generator import generate  # noqa: E402
from src.models.fmt import FmtModel  # noqa: E402
from src.utils.exceptions import FmtError  # noqa: E402
from src.utils.logger import setup_logger  # noqa: E402


def create_directories():
    """Create the data, checkpoint, report and log directories."""
    logger.info("Creating project directories...")

    paths = get_settings().paths
    for directory in (paths.data_dir, paths.checkpoints_dir, paths.reports_dir, paths.logs_dir):
        directory.mkdir(parents=True, exist_ok=True)
        logger.info(f"✓ Created: {directory}")


def validate_configuration() -> bool:
    """Load every bundled config and build the small model once."""
    logger.info("Validating configuration...")

    for path in (MODEL_CONFIG, SMALL_MODEL_CONFIG, TRAIN_CONFIG):
        try:
            load_settings(path)
            logger.info(f"✓ {path.name} is valid")
        except FmtError as e:
            logger.error(f"✗ {path.name}: {e}")
            return False

    try:
        FmtModel(load_settings(TRAIN_CONFIG, SMALL_MODEL_CONFIG).model)
        logger.info("✓ Small model builds")
    except FmtError as e:
        logger.error(f"✗ Failed to build the small model: {e}")
        return False
    return True


def generate_default_dataset() -> Path:
    """Write the standard synthetic benchmark to data/synthetic.jsonl."""
    settings = load_settings(TRAIN_CONFIG)
    target = get_settings().paths.data_dir / "synthetic.jsonl"
    count = dataset_io.save(generate(settings.data), target)
    logger.info(f"✓ Wrote {count} records to {target}")
    return target


def main():
    """Main initialization function."""
    setup_logger("INFO")
    logger.info("=" * 60)
    logger.info("FMT Desk - Project Initialization")
    logger.info("=" * 60)

    # Step 1: Create directories
    create_directories()
    logger.info("")

    # Step 2: Validate configuration
    if not validate_configuration():
        logger.error("Configuration validation failed. Please check config/.")
        sys.exit(1)
    logger.info("")

    # Step 3: Default dataset
    generate_default_dataset()

    logger.info("")
    logger.info("=" * 60)
    logger.info("✓ Project initialization complete!")
    logger.info("=" * 60)
    logger.info("")
    small = SMALL_MODEL_CONFIG.relative_to(SMALL_MODEL_CONFIG.parents[2])
    logger.info("Next steps:")
    logger.info(
        "1. Train: python scripts/fmt_cli.py train --data data/synthetic.jsonl "
        f"--out checkpoints/fmt.ckpt --config {small}"
    )
    logger.info("2. Run the ablation benchmark: python scripts/benchmark/run_benchmark.py")


if __name__ == "__main__":
    main()
