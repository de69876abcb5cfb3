"""
Figures written next to run artifacts.
"""

from pathlib import Path
from typing import Optional, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

ERROR_COLORMAP = "inferno"


def plot_loss_curve(history: pd.DataFrame, path: Union[str, Path]) -> Path:
    """Training loss per step with the learning rate on a twin axis."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.plot(history["step"], history["loss"], color="tab:blue", linewidth=1.0)
    ax.set_xlabel("step")
    ax.set_ylabel("L1 loss (normalized)", color="tab:blue")
    ax.set_yscale("log")
    lr_ax = ax.twinx()
    lr_ax.step(history["step"], history["lr"], color="tab:orange", where="post")
    lr_ax.set_ylabel("learning rate", color="tab:orange")
    lr_ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def colorize(values: np.ndarray, vmax: Optional[float] = None, cmap: str = ERROR_COLORMAP) -> np.ndarray:
    """Map a non-negative 2-D array to 8-bit RGB; values are scaled by ``vmax`` (default: max)."""
    values = np.asarray(values, dtype=np.float64)
    top = float(values.max(initial=0.0)) if vmax is None else float(vmax)
    scaled = values / top if top > 0 else np.zeros_like(values)
    rgba = matplotlib.colormaps[cmap](np.clip(scaled, 0.0, 1.0))
    return (rgba[..., :3] * 255.0).round().astype(np.uint8)


def plot_weight_inspection(inspection, guide: np.ndarray, path: Union[str, Path], scale: int) -> Path:
    """
    Draw one query pixel and its four LR corners on the guide, with marker size
    and label showing each corner's learned weight.

    :param inspection: A ``WeightInspection``.
    :param guide: Guide image ``(H, W, 3)`` in [0, 1].
    :param scale: Up-sampling factor mapping LR indices onto guide pixels.
    """
    path = Path(path)
    row, col = inspection.pixel
    corners = np.asarray(inspection.corner_indices, dtype=np.float64) * scale + (scale - 1) / 2.0
    weights = np.asarray(inspection.weights)

    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(np.clip(guide, 0.0, 1.0))
    ax.scatter(corners[:, 1], corners[:, 0], s=40 + 400 * weights, c="cyan", edgecolors="black")
    for (y, x), weight in zip(corners, weights):
        ax.annotate(f"{weight:.2f}", (x, y), color="white", fontsize=8, xytext=(4, 4), textcoords="offset points")
    ax.scatter([col], [row], marker="x", c="red", s=60)
    span = 2 * scale
    ax.set_xlim(col - span, col + span)
    ax.set_ylim(row + span, row - span)
    ax.set_title(f"pixel ({row}, {col})")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
