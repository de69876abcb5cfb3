"""
Seeded synthetic RGB-D pairs for download-free runs.

Depth is piecewise smooth: the image is split by random lines into regions,
each carrying its own plane, and Gaussian bumps are added on top. The guide
paints each region in its own color, shades it by depth and adds texture, so
guide edges coincide with depth edges while the texture has no depth
counterpart.
"""

from typing import List

import numpy as np
import torch

from src.jiif.data.pairs import RGBDPair
from src.jiif.exceptions import InvalidArgumentError
from src.jiif.seeding import numpy_rng

MIN_DEPTH_CM = 50.0


def _region_labels(rng: np.random.Generator, yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
    labels = np.zeros(yy.shape, dtype=np.int64)
    n_regions = int(rng.integers(2, 5))
    for label in range(1, n_regions):
        py, px = rng.uniform(0.2, 0.8, size=2)
        angle = rng.uniform(0.0, np.pi)
        side = (xx - px) * np.cos(angle) + (yy - py) * np.sin(angle) > 0
        labels[side] = label
    return labels


def synthetic_pair(rng: np.random.Generator, size: int, name: str = "") -> RGBDPair:
    if size < 8:
        raise InvalidArgumentError(f"synthetic images need size >= 8, got {size}")
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    labels = _region_labels(rng, yy, xx)
    n_labels = int(labels.max()) + 1

    offsets = rng.uniform(150.0, 450.0, size=n_labels)
    slopes = rng.uniform(-80.0, 80.0, size=(n_labels, 2))
    depth = offsets[labels] + slopes[labels, 0] * yy + slopes[labels, 1] * xx

    for _ in range(int(rng.integers(1, 4))):
        amplitude = rng.uniform(-40.0, 40.0)
        cy, cx = rng.uniform(0.0, 1.0, size=2)
        width = rng.uniform(0.05, 0.2)
        depth += amplitude * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * width**2))
    depth = np.maximum(depth, MIN_DEPTH_CM)

    colors = rng.uniform(0.15, 0.85, size=(n_labels, 3))
    shading = (depth - depth.min()) / max(float(np.ptp(depth)), 1e-6)
    freq = rng.uniform(6.0, 20.0, size=2)
    stripes = 0.04 * np.sin(2.0 * np.pi * (freq[0] * yy + freq[1] * xx))
    guide = colors[labels] * (0.85 + 0.15 * shading)[..., None]
    guide += stripes[..., None] + rng.normal(0.0, 0.02, size=guide.shape)
    guide = np.clip(guide, 0.0, 1.0)

    return RGBDPair(
        guide=torch.from_numpy(guide.transpose(2, 0, 1).astype(np.float32)),
        depth=torch.from_numpy(depth[None].astype(np.float32)),
        value_kind="depth",
        name=name,
    )


def generate_synthetic(count: int, seed: int, size: int = 128, split: str = "test") -> List[RGBDPair]:
    """``count`` reproducible pairs; each pair draws from its own seed stream."""
    if count < 1:
        raise InvalidArgumentError(f"count must be positive, got {count}")
    return [
        synthetic_pair(numpy_rng(seed, "synthetic", split, index), size, name=f"{split}_{index:04d}")
        for index in range(count)
    ]
