"""Figure rendering for report outputs.

Every CLI report path writes its delimited data first and then, unless
figures are disabled, renders the matching matplotlib figures next to it.
All functions take data plus a target path and return the path written.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def _save(fig, path):
    fig.savefig(path, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return str(path)


def matrix_heatmap(values, path, title="", zero_diagonal=False, cmap="gray"):
    """Heatmap of a square matrix; optionally blank the diagonal so
    off-diagonal detail stays visible."""
    values = np.array(values, dtype=float)
    if zero_diagonal:
        np.fill_diagonal(values, 0.0)
    fig, ax = plt.subplots(figsize=(4.2, 3.6))
    im = ax.imshow(values, cmap=cmap, interpolation="nearest")
    fig.colorbar(im, ax=ax, fraction=0.046)
    ax.set_title(title)
    ax.set_xlabel("graph")
    ax.set_ylabel("graph")
    return _save(fig, path)


def scree_plot(values, path, selected=None, title="scree"):
    values = np.asarray(values, dtype=float)
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.plot(np.arange(1, values.size + 1), values, "o-", ms=3, lw=1)
    if selected is not None:
        ax.axvline(selected, color="crimson", lw=1, ls="--", label=f"d = {selected}")
        ax.legend(frameon=False)
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    ax.set_title(title)
    return _save(fig, path)


def stress_trace(sigmas, path, title="stress per iteration"):
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    ax.plot(np.arange(len(sigmas)), sigmas, lw=1.2)
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("stress")
    ax.set_title(title)
    return _save(fig, path)


def dendrogram_plot(dendrogram, path, labels=None, title="ward.D2 dendrogram"):
    from scipy.cluster.hierarchy import dendrogram as scipy_dendrogram

    link = dendrogram.to_linkage()
    fig, ax = plt.subplots(figsize=(max(4.5, dendrogram.m * 0.28), 3.4))
    scipy_dendrogram(link, ax=ax, labels=labels, color_threshold=0.0)
    ax.set_ylabel("height")
    ax.set_title(title)
    return _save(fig, path)


def cmds_pairs(coords, path, title="classical MDS", connect=True):
    """Pairs plot of the first three MDS dimensions, sequential graphs joined."""
    coords = np.asarray(coords, dtype=float)
    k = min(3, coords.shape[1])
    fig, axes = plt.subplots(k, k, figsize=(2.4 * k, 2.4 * k), squeeze=False)
    for i in range(k):
        for j in range(k):
            ax = axes[i][j]
            if i == j:
                ax.hist(coords[:, i], bins=12, color="steelblue")
            else:
                if connect:
                    ax.plot(coords[:, j], coords[:, i], "-", color="0.8", lw=0.8, zorder=1)
                ax.scatter(coords[:, j], coords[:, i], s=14, c=np.arange(len(coords)), cmap="viridis", zorder=2)
            if i == k - 1:
                ax.set_xlabel(f"X{j + 1}")
            if j == 0:
                ax.set_ylabel(f"X{i + 1}")
    fig.suptitle(title)
    return _save(fig, path)


def difference_cloud(points_by_label, path, title="scaled embedding differences"):
    """Overlayed 2-d scatter clouds, one color per label."""
    fig, ax = plt.subplots(figsize=(4.0, 4.0))
    colors = ["black", "crimson", "steelblue", "seagreen", "darkorange"]
    for idx, (label, pts) in enumerate(points_by_label.items()):
        pts = np.asarray(pts, dtype=float)
        ax.scatter(pts[:, 0], pts[:, 1], s=4, alpha=0.5, label=label, color=colors[idx % len(colors)])
    ax.legend(frameon=False, markerscale=3)
    ax.set_xlabel("coordinate 1")
    ax.set_ylabel("coordinate 2")
    ax.set_title(title)
    return _save(fig, path)


def bounds_curve(rows, path, title="flat correlation bounds"):
    """Bound values against m from a theta_gap_check table."""
    ms = [row["m"] for row in rows]
    fig, ax = plt.subplots(figsize=(4.6, 3.2))
    ax.plot(ms, [row["lower"] for row in rows], "o-", ms=3, label="lower bound")
    ax.plot(ms, [row["upper"] for row in rows], "s-", ms=3, label="upper bound")
    ax.axhline(0.75, color="0.4", lw=1, ls=":", label="classical value")
    ax.set_xscale("log")
    ax.set_xlabel("m")
    ax.set_ylabel("flat correlation")
    ax.legend(frameon=False)
    ax.set_title(title)
    return _save(fig, path)
