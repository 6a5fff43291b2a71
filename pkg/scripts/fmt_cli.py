#!/usr/bin/env python
"""
FMT Desk command line.

Usage:
    python scripts/fmt_cli.py gen-data --out data/synth.jsonl --n 200 --seed 7
    python scripts/fmt_cli.py train --data data/synth.jsonl --out checkpoints/fmt.ckpt
    python scripts/fmt_cli.py eval --model checkpoints/fmt.ckpt --data data/synth.jsonl \
        --report reports/eval.csv --drop-text
"""

import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
