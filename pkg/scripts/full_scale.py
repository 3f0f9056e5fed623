"""Opt-in full-scale benchmark runs, each against an SI-DSA baseline.

Writes one output directory per scenario under ``--out``. Expect hours for
the 2D cases on a desktop; wall-clock speedups are hardware dependent.

    python scripts/full_scale.py --out results/full --scenarios two_material_1d lattice_2d
"""

import argparse
import sys
from pathlib import Path

from rte_accel import cli
from rte_accel.scenarios import CATALOG


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("results/full"))
    p.add_argument("--scenarios", nargs="+", default=list(CATALOG), choices=list(CATALOG))
    p.add_argument("--mode", default="dmd-si-dsa")
    p.add_argument("--threads", type=int, default=0)
    args = p.parse_args()
    failed = 0
    for name in args.scenarios:
        code = cli.main(["--scenario", name, "--mode", args.mode, "--compare-baseline",
                         "--threads", str(args.threads), "--out", str(args.out / name)])
        print(f"{name}: exit {code}")
        failed += code != 0
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
