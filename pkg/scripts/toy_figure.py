"""Toy experiment sweep: accuracy vs training bearings per class, valid vs leakage test sets.

    python scripts/toy_figure.py --out results/toy [--plot]
"""

import argparse
import csv
from pathlib import Path

from bearingleak import cli, toy


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/toy")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--plot", action="store_true", help="also write toy.png (needs matplotlib)")
    args = ap.parse_args()
    cli.main(["toy", "--seeds", str(args.seeds), "--out", args.out])
    if not args.plot:
        return
    import matplotlib.pyplot as plt

    lines = [l for l in (Path(args.out) / "toy_aggregate.csv").read_text().splitlines() if not l.startswith("#")]
    rows = list(csv.DictReader(lines))
    fig, ax = plt.subplots(figsize=(6, 4))
    for model in sorted({r["model"] for r in rows}):
        for mode, style in (("valid", "-"), ("leakage", "--")):
            sel = [r for r in rows if r["model"] == model and r["mode"] == mode]
            ax.plot([int(r["n_train_bearings"]) for r in sel], [float(r["mean"]) for r in sel], style,
                    marker="o", label=f"{model} ({mode})")
    ax.axhline(toy.theoretical_max_accuracy(1.5, 3), color="k", lw=0.8, label="MAP ceiling")
    ax.set_xlabel("training bearings per class")
    ax.set_ylabel("accuracy")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(Path(args.out) / "toy.png", dpi=150)


if __name__ == "__main__":
    main()
