#!/usr/bin/env python3
"""Reproduce the four-algorithm ring-16 comparison (traces + report table)."""

import sys
from pathlib import Path

from netsaddle.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "ring16_compare.yaml"

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else None
    argv = ["compare", "--config", str(CONFIG)]
    if out:
        argv += ["--out", out]
    sys.exit(main(argv))
