"""
Classical interpolation: bilinear corner weights, the generic weighted sum over the
four corners, and Catmull-Rom bicubic resampling under the shared pixel-center
convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch

from src.jiif import settings
from src.jiif.coordgrid import QueryBundle, make_coord_grid, sample_latent
from src.jiif.exceptions import InvalidArgumentError

NORMALIZATION_TOLERANCE = 1e-6


@dataclass(frozen=True)
class InterpolationBundle:
    """Per-query corner weights and values, plus bilinear areas when known."""

    weights: torch.Tensor  # (B, N, 4)
    values: torch.Tensor  # (B, N, 4)
    areas: Optional[torch.Tensor] = None  # (B, N, 4) partial areas S_i
    total_area: Optional[torch.Tensor] = None  # (B, N) S

    def interpolate(self, debug: Optional[bool] = None) -> torch.Tensor:
        return weighted_interpolate(self.weights, self.values, debug=debug)


# corner k sits diagonally opposite corner 3 - k in (tl, tr, bl, br) order
_OPPOSITE = (3, 2, 1, 0)


def bilinear_areas(bundle: QueryBundle) -> tuple:
    """Partial areas S_i (opposite-corner rectangles) and their sum S."""
    rel = bundle.rel_coords
    rect = (rel[..., 0] * rel[..., 1]).abs()
    areas = rect[..., list(_OPPOSITE)]
    return areas, areas.sum(dim=-1)


def bilinear_weights(bundle: QueryBundle) -> torch.Tensor:
    """Weights w_i = S_i / S of classic bilinear interpolation, shape (B, N, 4)."""
    areas, total = bilinear_areas(bundle)
    return areas / total.unsqueeze(-1)


def bilinear_bundle(bundle: QueryBundle, values: torch.Tensor) -> InterpolationBundle:
    areas, total = bilinear_areas(bundle)
    return InterpolationBundle(
        weights=areas / total.unsqueeze(-1), values=values, areas=areas, total_area=total
    )


def weighted_interpolate(
    weights: torch.Tensor, values: torch.Tensor, debug: Optional[bool] = None
) -> torch.Tensor:
    """
    Sum over corners of w * v.

    :param weights: Normalized weights ``(..., 4)``.
    :param values: Corner values ``(..., 4)``.
    :param debug: Check the normalization contract; defaults to ``JIIF_DEBUG``.
    :raises InvalidArgumentError: In debug mode, when weights do not sum to one.
    """
    if weights.shape != values.shape:
        raise InvalidArgumentError(
            f"weights {tuple(weights.shape)} and values {tuple(values.shape)} differ in shape"
        )
    check = settings.DEBUG_CHECKS if debug is None else debug
    if check:
        deviation = (weights.sum(dim=-1) - 1.0).abs().max().item() if weights.numel() else 0.0
        if deviation > NORMALIZATION_TOLERANCE:
            raise InvalidArgumentError(
                f"interpolation weights are not normalized (max |sum - 1| = {deviation:.3e})"
            )
    return (weights * values).sum(dim=-1)


def bicubic_resample(image: torch.Tensor, out_height: int, out_width: int) -> torch.Tensor:
    """
    Resample ``(C, H, W)`` or ``(B, C, H, W)`` to a new size with the Catmull-Rom kernel.

    Output pixel centers are placed on the shared (-1, 1) grid and the input is
    extended by symmetric reflection. There is no anti-alias pre-filter.
    """
    if int(out_height) < 1 or int(out_width) < 1:
        raise InvalidArgumentError(
            f"output size must be positive, got {out_height}x{out_width}"
        )
    if image.dim() not in (3, 4) or image.numel() == 0:
        raise InvalidArgumentError(
            f"image must be a non-empty (C, H, W) or (B, C, H, W) tensor, got {tuple(image.shape)}"
        )
    batched = image.dim() == 4
    codes = image if batched else image.unsqueeze(0)
    if codes.shape[-2:] == (out_height, out_width):
        out = codes.clone()
    else:
        batch, channels = codes.shape[:2]
        coords = make_coord_grid(out_height, out_width, codes.dtype).flatten().to(codes.device)
        sampled = sample_latent(codes, coords.unsqueeze(0).expand(batch, -1, -1), "bicubic")
        out = sampled.transpose(1, 2).reshape(batch, channels, out_height, out_width)
    return out if batched else out.squeeze(0)


def bicubic_downsample(image: torch.Tensor, scale: int) -> torch.Tensor:
    """Plain bicubic down-sampling by an integer factor dividing both sides."""
    height, width = image.shape[-2:]
    if scale < 1 or height % scale or width % scale:
        raise InvalidArgumentError(
            f"scale {scale} must divide the image size {height}x{width}"
        )
    return bicubic_resample(image, height // scale, width // scale)
