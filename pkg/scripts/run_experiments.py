#!/usr/bin/env python3
"""Desk-scale experiment sweep: selection metrics across network sizes.

Runs the Monte Carlo harness over a grid of (J, rbar) cells for each method,
writes per-trial and aggregate CSVs, and renders the summary charts. Scale
the trial count with --trials; the full sweep at the default 10 trials takes
tens of minutes.
"""

import argparse
import sys
import time
from pathlib import Path

from wsnsel.cli import main as cli_main


def run(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = []
    for J in args.J:
        for rbar in args.rbar:
            cells.append(f"{J},1,2,{rbar},{args.method}")
    t0 = time.time()
    code = cli_main([
        "mc",
        "--cells", ";".join(cells),
        "--trials", str(args.trials),
        "--seed", str(args.seed),
        "--out", str(out / "metrics.csv"),
        "--agg-out", str(out / "aggregates.csv"),
    ])
    if code != 0:
        return code
    print(f"monte carlo finished in {time.time() - t0:.1f}s")
    return cli_main([
        "report",
        "--metrics", str(out / "metrics.csv"),
        "--out-dir", str(out),
    ])


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--method", default="ssls",
                    choices=("ssls", "ssrls", "linksel"))
    ap.add_argument("--J", type=int, nargs="+", default=[30, 50])
    ap.add_argument("--rbar", type=float, nargs="+", default=[0.4, 0.7])
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", default="experiments")
    sys.exit(run(ap.parse_args()))
