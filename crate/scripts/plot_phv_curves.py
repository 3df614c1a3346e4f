#!/usr/bin/env python3
"""Plot hypervolume-vs-oracle-calls curves from one or more exploration runs.

Usage: plot_phv_curves.py RUN_DIR [RUN_DIR ...] [-o out.png]

Each RUN_DIR must contain the phv_curve.csv written by `attention-dse explore`.
Non-core convenience; the CSVs are the contract.
"""

import argparse
import csv
import pathlib


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("runs", nargs="+", type=pathlib.Path)
    ap.add_argument("-o", "--out", default="phv_curves.png")
    args = ap.parse_args()

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for run in args.runs:
        with open(run / "phv_curve.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        calls = [int(r["oracle_calls"]) for r in rows]
        hv = [float(r["hypervolume"]) for r in rows]
        ax.step(calls, hv, where="post", label=run.name)
    ax.set_xlabel("oracle calls")
    ax.set_ylabel("Pareto hypervolume")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
