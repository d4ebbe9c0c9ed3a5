"""Figure rendering for the CLI report commands.

Every report command writes its delimited data files first; these helpers
then render companion PNG figures from the same rows, so the figures can
always be reproduced from the CSVs alone.
"""

from __future__ import annotations

from collections import defaultdict

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .mc import INADMISSIBLE_MARK  # noqa: E402


def save_path_figure(values: np.ndarray, out_png, title: str = "sample path"):
    values = np.asarray(values)
    n, p = values.shape
    fig, ax = plt.subplots(figsize=(8, 4.5))
    t = np.arange(1, n + 1)
    for i in range(p):
        ax.plot(t, values[:, i], lw=0.8,
                label=f"x{i + 1}" if p <= 8 else None)
    ax.set_xlabel("t")
    ax.set_ylabel("x(t)")
    ax.set_title(f"{title} (n={n}, p={p})")
    if p <= 8:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def save_convergence_figure(std_rows, slope_rows, out_png):
    """Log-log spread versus sample size, one line per parameter, with the
    fitted slope in the legend."""
    series = defaultdict(list)
    for n, label, std in std_rows:
        series[label].append((int(n), float(std)))
    slopes = {label: float(slope) for label, slope, _, _ in slope_rows}
    fig, ax = plt.subplots(figsize=(7, 5))
    for label, pts in series.items():
        pts = sorted(pts)
        ax.loglog([n for n, _ in pts], [s for _, s in pts], "o-",
                  label=f"{label} (slope {slopes.get(label, float('nan')):.2f})")
    ns = sorted({int(n) for n, _, _ in std_rows})
    ref = [series[next(iter(series))][0][1] * (ns[0] / n) ** 0.5 for n in ns]
    ax.loglog(ns, ref, "k--", lw=1, label="slope -1/2")
    ax.set_xlabel("sample size n")
    ax.set_ylabel("estimated std")
    ax.legend(fontsize=7)
    ax.set_title("estimator spread vs sample size")
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def save_mc_table_figure(rows, out_png):
    """Grouped bars of per-cell MSE on a log scale, one panel per target."""
    targets = sorted({row[8] for row in rows})
    variants = sorted({row[7] for row in rows})
    fig, axes = plt.subplots(len(targets), 1,
                             figsize=(9, 2.8 * len(targets)), squeeze=False)
    for ax, target in zip(axes[:, 0], targets):
        cells = []
        for row in rows:
            if row[8] != target:
                continue
            cell = f"{row[0][:4]} p={row[1]} H={row[2]} r={row[3]}"
            if cell not in cells:
                cells.append(cell)
        width = 0.8 / max(len(variants), 1)
        for vi, variant in enumerate(variants):
            xs, ys = [], []
            for row in rows:
                if row[8] != target or row[7] != variant:
                    continue
                if row[9] == INADMISSIBLE_MARK:
                    continue
                cell = f"{row[0][:4]} p={row[1]} H={row[2]} r={row[3]}"
                xs.append(cells.index(cell) + vi * width)
                ys.append(float(row[9]))
            if xs:
                ax.bar(xs, ys, width=width, label=variant)
        ax.set_yscale("log")
        ax.set_xticks(np.arange(len(cells)) + 0.4)
        ax.set_xticklabels(cells, rotation=30, ha="right", fontsize=6)
        ax.set_ylabel(f"MSE({target})")
        ax.legend(fontsize=7, title="variant")
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)


def save_highdim_figures(result, prefix):
    """Two figures: per-node true-vs-estimated exponents and neighbor
    correlations, and the pair of partial-correlation matrices."""
    p = result.params.p
    nodes = np.arange(1, p + 1)
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax1.plot(nodes, result.params.H, "k-", lw=1, label="true H")
    ax1.plot(nodes, result.H_hat, "r.", ms=4, label="estimated H")
    ax1.set_ylabel("Hurst exponent")
    ax1.legend(fontsize=8)
    rho_next_true = [result.params.rho[i, i + 1] for i in range(p - 1)]
    rho_next_est = [result.rho_hat[i, i + 1] for i in range(p - 1)]
    ax2.plot(nodes[:-1], rho_next_true, "k-", lw=1, label="true rho(i,i+1)")
    ax2.plot(nodes[:-1], rho_next_est, "r.", ms=4, label="estimated")
    ax2.set_xlabel("node")
    ax2.set_ylabel("neighbor correlation")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(f"{prefix}_estimates.png", dpi=150)
    plt.close(fig)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.5))
    scale = max(np.max(np.abs(result.partial_true - np.eye(p))), 1e-3)
    for ax, mat, title in ((ax1, result.partial_true, "true"),
                           (ax2, result.partial_est, "estimated")):
        shown = mat - np.diag(np.diag(mat))
        im = ax.imshow(shown, cmap="RdBu_r", vmin=-scale, vmax=scale)
        ax.set_title(f"{title} partial correlation")
        fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(f"{prefix}_partial_corr.png", dpi=150)
    plt.close(fig)


def save_matrix_figure(matrix: np.ndarray, out_png, title: str):
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(matrix, cmap="viridis")
    ax.set_title(title)
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    fig.savefig(out_png, dpi=150)
    plt.close(fig)
