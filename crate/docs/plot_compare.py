"""Plot compare.csv, lpp_summary.csv or threshold_scan.csv. Not part of the tool.

    python docs/plot_compare.py out/compare.csv [out.png]
"""
import sys

import matplotlib.pyplot as plt
import pandas as pd


def main(path, out=None):
    df = pd.read_csv(path, comment="#")
    fig, ax = plt.subplots(figsize=(6, 4))
    if {"x", "empirical", "bound_or_prediction"} <= set(df.columns):
        for tag, g in df.groupby("source_tag"):
            g = g.sort_values("x")
            ax.errorbar(g.x, g.empirical, yerr=3 * g.empirical_se, fmt="o", label=f"empirical ({tag})")
            ax.plot(g.x, g.bound_or_prediction, "--", label=tag)
        ax.set_xscale("log")
    elif "mean_delay_per_hop" in df.columns:
        for alpha, g in df.groupby("alpha"):
            ax.plot(g.k, g.mean_delay_per_hop, "o-", label=f"alpha={alpha}")
            ax.axhline(g.prediction.iloc[0], ls="--", color="grey")
        ax.set_xlabel("k")
        ax.set_ylabel("delay per hop")
    elif {"alpha", "i", "g"} <= set(df.columns):
        for alpha, g in df.groupby("alpha"):
            ax.plot(g.i, g.g, "o-", label=f"alpha={alpha}")
        ax.set_xlabel("i")
        ax.set_ylabel("g")
    else:
        sys.exit(f"don't know how to plot {path}")
    ax.legend()
    fig.tight_layout()
    if out:
        fig.savefig(out, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main(*sys.argv[1:3])
