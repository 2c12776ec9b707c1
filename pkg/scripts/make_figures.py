#!/usr/bin/env python3
"""Emit the datasets behind every figure as JSON files in one run.

Usage:
    python scripts/make_figures.py [--outdir figures] [--steps 200] [--threads N]

fig2 - detector response bands; fig3 - heralded vs Poisson photon-number
distribution; fig4 - normalized photon-number uncertainty; fig5/fig6 -
Mandel-Q maps over (g, eta) with herald-probability contours for the
single-mode and five-mode sources.
"""

import argparse
import json
import os
import time
from pathlib import Path

from heralded_fock.analysis import figure_data

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--outdir", default="figures", help="output directory")
    parser.add_argument("--steps", type=int, default=200, help="Q-map grid resolution")
    parser.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("HERALD_THREADS", "1")),
        help="worker threads for the Q-map sweeps",
    )
    args = parser.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for which in FIGURES:
        params = {}
        if which in ("fig5", "fig6"):
            params = {"steps": args.steps, "workers": args.threads}
        t0 = time.perf_counter()
        data = figure_data(which, **params)
        path = outdir / f"{which}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(data, fh, indent=2)
        print(f"{path}  ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
