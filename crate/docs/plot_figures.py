"""Plot figure data produced by `thermometry figure`.

    thermometry figure fig5 -o data/fig5.csv
    python docs/plot_figures.py data/fig5.csv -o fig5.png

Every column after the first is drawn against the first. For fig4 (two
axes) the third column is drawn as a filled contour over the first two.
"""

import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def load(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body])
    return header, data


def plot_lines(ax, header, data):
    for j in range(1, len(header)):
        ax.plot(data[:, 0], data[:, j], label=header[j])
    ax.set_xlabel(header[0])
    ax.legend(fontsize="small")


def plot_contour(ax, header, data):
    xs, ys = np.unique(data[:, 0]), np.unique(data[:, 1])
    z = data[:, 2].reshape(len(xs), len(ys))
    cs = ax.contourf(xs, ys, z.T, levels=20)
    ax.figure.colorbar(cs, ax=ax, label=header[2])
    ax.set_xlabel(header[0])
    ax.set_ylabel(header[1])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("csv")
    parser.add_argument("-o", "--output", default=None)
    parser.add_argument("--contour", action="store_true", help="force a two-axis contour plot")
    args = parser.parse_args()

    header, data = load(args.csv)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    # a repeated first column means the rows span a two-axis grid
    two_axes = args.contour or len(np.unique(data[:, 0])) < len(data)
    (plot_contour if two_axes else plot_lines)(ax, header, data)
    fig.tight_layout()
    fig.savefig(args.output or args.csv.rsplit(".", 1)[0] + ".png", dpi=150)


if __name__ == "__main__":
    main()
