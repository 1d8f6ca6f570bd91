"""Elasticity of price volatility over time; CSVs, plus PNGs if matplotlib is present."""

import argparse
import csv
import sys
from pathlib import Path

from carbon_radner import tables as tb
from carbon_radner.config_io import baseline_config, load_config


def _plot(art, path):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return False
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, vals in art.curves:
        ax.plot(range(1, len(vals) + 1), vals, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("elasticity of std(P_t)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--out", default="results/figures")
    ap.add_argument("--no-plot", action="store_true")
    args = ap.parse_args()
    cfg = load_config(args.config).market if args.config else baseline_config()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in tb.FIGURE_NAMES:
        art = tb.build_figure(cfg, name)
        (out / f"{name}.csv").write_text(art.to_csv())
        plotted = not args.no_plot and _plot(art, out / f"{name}.png")
        ends = ", ".join(f"{lab}: {v[0]:.4g} -> {v[-1]:.4g}" for lab, v in art.curves[:3])
        print(f"{name}{' (png)' if plotted else ''}: {ends}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
