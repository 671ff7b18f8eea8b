"""Plot best-over-grid mean objective gap per epoch from a sweep directory.

    python python/plot_results.py results/paper_default [out.png]
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    run_dir = Path(sys.argv[1])
    out = Path(sys.argv[2]) if len(sys.argv) > 2 else run_dir / "best_over_grid.png"
    best = pd.read_csv(run_dir / "best_over_grid.csv")
    fig, (ax_fo, ax_zo) = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
    for name, rows in best.groupby("algorithm"):
        ax = ax_zo if name.startswith("Z") else ax_fo
        ax.semilogy(rows["epoch"], rows["best_mean_gap"], label=name)
    for ax, title in ((ax_fo, "first order"), (ax_zo, "zeroth order")):
        ax.set_title(title)
        ax.set_xlabel("epoch")
        ax.legend()
    ax_fo.set_ylabel("best mean f(x) - f*")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
