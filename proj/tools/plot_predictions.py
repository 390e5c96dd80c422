#!/usr/bin/env python3
"""Plot a predictions CSV emitted by `qesn fit-report`.

Usage: plot_predictions.py predictions_qesn8q_distribution_clean_seed3.csv [out.png]
"""
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    path = sys.argv[1]
    out = sys.argv[2] if len(sys.argv) > 2 else path.rsplit(".", 1)[0] + ".png"

    with open(path) as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, data = rows[0], rows[1:]
    t = [int(r[0]) for r in data]
    series = {name: [float(r[i]) for r in data] for i, name in enumerate(header) if i}

    pairs = sorted({name[:-5] for name in series if name.endswith("_true")})
    fig, axes = plt.subplots(len(pairs), 1, figsize=(10, 3 * len(pairs)), sharex=True)
    if len(pairs) == 1:
        axes = [axes]
    for ax, name in zip(axes, pairs):
        ax.plot(t, series[name + "_true"], label=f"{name} true", lw=1.0)
        ax.plot(t, series[name + "_pred"], label=f"{name} predicted", lw=1.0, ls="--")
        ax.set_ylabel(name)
        ax.legend(loc="upper right")
    axes[-1].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
