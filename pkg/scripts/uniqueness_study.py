#!/usr/bin/env python3
"""Run the uniqueness duality campaign and print the refinement table."""

import argparse
import sys
from pathlib import Path

from sktsim.campaigns import run_campaign
from sktsim.config import parse_config

ROOT = Path(__file__).resolve().parent.parent


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(ROOT / "configs" / "cfg_a_1d.cfg"))
    parser.add_argument("--out", default="out/uniqueness")
    args = parser.parse_args()
    results = run_campaign("uniqueness", parse_config(args.config), Path(args.out))
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 4


if __name__ == "__main__":
    sys.exit(main())
