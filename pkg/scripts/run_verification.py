#!/usr/bin/env python3
"""Run the theory checks (guaranteed-stepsize dogt run, all inequalities)."""

import sys
from pathlib import Path

from netsaddle.cli import main

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "ring16_verify.yaml"

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else None
    argv = ["verify", "--config", str(CONFIG)]
    if out:
        argv += ["--out", out]
    sys.exit(main(argv))
