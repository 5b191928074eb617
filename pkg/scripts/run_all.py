#!/usr/bin/env python3
"""Reproduce every artifact: fig3/fig4/fig5 CSVs plus the oracle report.

Usage:
  python scripts/run_all.py [--config configs/default.yaml] [--out results] [--seed N]

Stops at the first failing step and propagates its exit code.
"""

import argparse
import sys
import time

from v2i_fairness.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default="configs/default.yaml")
    parser.add_argument("--out", default=None)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    common = ["--config", args.config]
    if args.out is not None:
        common += ["--out", args.out]
    if args.seed is not None:
        common += ["--seed", str(args.seed)]

    for verb in ("validate-config", "fig4", "fig5", "fig3", "oracle"):
        print(f"\n=== {verb} ===")
        start = time.time()
        code = cli_main([verb, *common])
        print(f"[{verb}] exit {code} in {time.time() - start:.1f}s")
        if code != 0:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
