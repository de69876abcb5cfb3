"""
RGB-D pairs and per-image depth normalization.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal, Tuple

import torch

from src.jiif.exceptions import DataError, InvalidArgumentError
from utils.ml_logging import get_logger

logger = get_logger()

ValueKind = Literal["depth", "disparity"]


@dataclass(frozen=True)
class RGBDPair:
    """
    An aligned guide/depth pair.

    ``guide`` is ``(3, H, W)`` in [0, 1]; ``depth`` is ``(1, H, W)`` in physical units
    (centimeters for depth datasets, raw disparity for disparity datasets).
    ``scale_factor`` converts stored 16-bit integers to those units.
    """

    guide: torch.Tensor
    depth: torch.Tensor
    value_kind: ValueKind = "depth"
    name: str = ""
    scale_factor: float = 0.1

    def __post_init__(self):
        if self.guide.dim() != 3 or self.guide.shape[0] != 3:
            raise DataError(f"pair '{self.name}': guide must be (3, H, W), got {tuple(self.guide.shape)}")
        if self.depth.dim() != 3 or self.depth.shape[0] != 1:
            raise DataError(f"pair '{self.name}': depth must be (1, H, W), got {tuple(self.depth.shape)}")
        if self.guide.shape[-2:] != self.depth.shape[-2:]:
            raise DataError(
                f"pair '{self.name}': guide {tuple(self.guide.shape[-2:])} and depth "
                f"{tuple(self.depth.shape[-2:])} differ in size"
            )
        if not torch.isfinite(self.depth).all() or (self.depth < 0).any():
            raise DataError(f"pair '{self.name}': depth must be finite and non-negative")

    @property
    def height(self) -> int:
        return self.depth.shape[-2]

    @property
    def width(self) -> int:
        return self.depth.shape[-1]

    def crop(self, top: int, left: int, height: int, width: int) -> "RGBDPair":
        return replace(
            self,
            guide=self.guide[:, top : top + height, left : left + width],
            depth=self.depth[:, top : top + height, left : left + width],
        )


@dataclass(frozen=True)
class DepthStats:
    minimum: float
    maximum: float
    degenerate: bool = False

    @property
    def span(self) -> float:
        return self.maximum - self.minimum


def depth_stats(depth: torch.Tensor) -> DepthStats:
    minimum = float(depth.min())
    maximum = float(depth.max())
    return DepthStats(minimum=minimum, maximum=maximum, degenerate=maximum <= minimum)


def normalize_with(depth: torch.Tensor, stats: DepthStats) -> torch.Tensor:
    """Apply another image's statistics (used for LR inputs and predictions)."""
    if stats.degenerate:
        return torch.zeros_like(depth)
    scaled = (depth.to(torch.float64) - stats.minimum) / stats.span
    return scaled.to(depth.dtype)


def normalize_depth(depth: torch.Tensor) -> Tuple[torch.Tensor, DepthStats]:
    """
    Affine map of one depth image onto [0, 1] using its own min and max.

    A constant image maps to zeros and its statistics are flagged ``degenerate``.
    """
    if depth.numel() == 0:
        raise InvalidArgumentError("cannot normalize an empty depth map")
    stats = depth_stats(depth)
    if stats.degenerate:
        logger.warning(f"normalize=degenerate min={stats.minimum} max={stats.maximum}")
    return normalize_with(depth, stats), stats


def denormalize(normalized: torch.Tensor, stats: DepthStats) -> torch.Tensor:
    restored = normalized.to(torch.float64) * stats.span + stats.minimum
    return restored.to(normalized.dtype)


def apply_flips(image: torch.Tensor, vertical: bool, horizontal: bool) -> torch.Tensor:
    dims = [d for d, flag in ((-2, vertical), (-1, horizontal)) if flag]
    return image.flip(dims) if dims else image


def flip_pair(pair: RGBDPair, vertical: bool, horizontal: bool) -> RGBDPair:
    return replace(
        pair,
        guide=apply_flips(pair.guide, vertical, horizontal),
        depth=apply_flips(pair.depth, vertical, horizontal),
    )


def center_crop_to_multiple(pair: RGBDPair, scale: int) -> RGBDPair:
    """Largest centered crop whose sides are multiples of ``scale``."""
    if scale < 1:
        raise InvalidArgumentError(f"scale must be positive, got {scale}")
    height = pair.height - pair.height % scale
    width = pair.width - pair.width % scale
    if height == 0 or width == 0:
        raise DataError(
            f"pair '{pair.name}' ({pair.height}x{pair.width}) is smaller than scale {scale}"
        )
    if (height, width) == (pair.height, pair.width):
        return pair
    return pair.crop((pair.height - height) // 2, (pair.width - width) // 2, height, width)
