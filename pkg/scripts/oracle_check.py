#!/usr/bin/env python3
"""Quick analytic-vs-simulated cross-check with a configurable event budget.

The full 1e5-event battery takes ~half a minute; this script exists for the
tighten-run-inspect loop while touching the simulator or the collision
calibration, e.g.:

  python scripts/oracle_check.py --events 20000 --episodes 500
"""

import argparse
import sys

from v2i_fairness.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default="configs/default.yaml")
    parser.add_argument("--out", default="results")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--events", type=int, default=20_000)
    parser.add_argument("--episodes", type=int, default=500)
    args = parser.parse_args()

    argv = ["oracle", "--config", args.config, "--out", args.out,
            "--events", str(args.events), "--episodes", str(args.episodes)]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
