"""SVG figures for training runs: sample scatters, image grids and uncertainty strips."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed salt and no timestamp keep the SVG bytes reproducible
RC = {
    "svg.hashsalt": "egan",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return path


def scatter_samples(real: np.ndarray, generated: np.ndarray, path, title: str = "", modes=None) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        ax.scatter(real[:, 0], real[:, 1], s=3, c="0.7", label="real", linewidths=0)
        ax.scatter(generated[:, 0], generated[:, 1], s=3, c="tab:red", alpha=0.6, label="generated", linewidths=0)
        if modes is not None:
            ax.scatter(modes[:, 0], modes[:, 1], marker="+", s=40, c="k", label="modes")
        ax.set_aspect("equal")
        ax.legend(loc="upper right", markerscale=3, frameon=False)
        if title:
            ax.set_title(title)
        return _save(fig, path)


def image_grid(images: np.ndarray, path, side: int = 16, cols: int = 8, title: str = "") -> Path:
    """Tile flattened ``side x side`` images in [-1, 1]."""
    n = len(images)
    rows = max(1, int(np.ceil(n / cols)))
    canvas = np.full((rows * (side + 1) + 1, cols * (side + 1) + 1), -1.0)
    for k, img in enumerate(images):
        r, c = divmod(k, cols)
        canvas[1 + r * (side + 1) : 1 + r * (side + 1) + side, 1 + c * (side + 1) : 1 + c * (side + 1) + side] = (
            img.reshape(side, side)
        )
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(cols * 0.6, rows * 0.6))
        ax.imshow(canvas, cmap="gray", vmin=-1, vmax=1, interpolation="nearest")
        ax.set_axis_off()
        if title:
            ax.set_title(title)
        return _save(fig, path)


def uncertainty_strips(widths: np.ndarray, path, title: str = "interval width per region") -> Path:
    """One heat strip per sample; columns are regions, colour is the interval width."""
    widths = np.atleast_2d(widths)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(max(3.0, 0.25 * widths.shape[1]), max(1.5, 0.25 * widths.shape[0])))
        im = ax.imshow(widths, cmap="magma", vmin=0.0, vmax=1.0, aspect="auto", interpolation="nearest")
        ax.set_xlabel("region")
        ax.set_ylabel("sample")
        fig.colorbar(im, ax=ax, fraction=0.05, label="width")
        ax.set_title(title)
        return _save(fig, path)
