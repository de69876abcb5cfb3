"""
Continuous image coordinates shared by the HR and LR domains.

Pixel (i, j) of an H x W image sits at (-1 + (2i+1)/H, -1 + (2j+1)/W). Coordinates
are (row, col) ordered; every tensor API here is batched: coordinates are
``(B, N, 2)`` and code maps are ``(B, C, H, W)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Tuple

import torch

from src.jiif.exceptions import InvalidArgumentError

SAMPLING_MODES = ("nearest", "bilinear", "bicubic")
CUBIC_A = -0.5


@dataclass(frozen=True)
class CoordGrid:
    """Pixel-center coordinates of an H x W grid, shape (H, W, 2), row-major."""

    height: int
    width: int
    coords: torch.Tensor

    def flatten(self) -> torch.Tensor:
        return self.coords.reshape(-1, 2)


class PixelIndex(NamedTuple):
    row: int
    col: int
    clamped: bool


@dataclass(frozen=True)
class QueryBundle:
    """
    The four LR corners of each query.

    Corner order is (top-left, top-right, bottom-left, bottom-right), i.e.
    ``(i0, j0), (i0, j1), (i1, j0), (i1, j1)``.

    ``corner_indices`` are clamped to the LR grid and ``corner_coords`` are the
    centers of those clamped pixels; ``rel_coords`` use the virtual pre-clamp
    corner positions, so border cells keep their true geometry.
    """

    query_coords: torch.Tensor  # (B, N, 2)
    corner_indices: torch.Tensor  # (B, N, 4, 2) long
    corner_coords: torch.Tensor  # (B, N, 4, 2)
    rel_coords: torch.Tensor  # (B, N, 4, 2)
    lr_height: int
    lr_width: int


def _check_size(height: int, width: int) -> None:
    if int(height) < 1 or int(width) < 1:
        raise InvalidArgumentError(
            f"grid dimensions must be positive, got {height}x{width}"
        )


def axis_centers(n: int, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Centers of n cells along one axis, exactly antisymmetric under flipping."""
    if n < 1:
        raise InvalidArgumentError(f"axis length must be positive, got {n}")
    idx = torch.arange(n, dtype=torch.float64)
    centers = (2.0 * idx + 1.0) / n - 1.0
    upper = idx > (n - 1) / 2.0
    centers = torch.where(upper, -centers.flip(0), centers)
    return centers.to(dtype)


def make_coord_grid(
    height: int, width: int, dtype: torch.dtype = torch.float32
) -> CoordGrid:
    _check_size(height, width)
    rows = axis_centers(height, dtype)
    cols = axis_centers(width, dtype)
    grid = torch.stack(torch.meshgrid(rows, cols, indexing="ij"), dim=-1)
    return CoordGrid(height=int(height), width=int(width), coords=grid)


def _to_pixel_space(coords: torch.Tensor, size: int) -> torch.Tensor:
    # continuous coordinate -> fractional pixel index (centers land on integers)
    return (coords + 1.0) * (size / 2.0) - 0.5


def nearest_indices(
    coords: torch.Tensor, height: int, width: int
) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """
    Vectorized nearest pixel lookup.

    Ties break toward the smaller index.

    :return: ``(rows, cols, clamped)`` where ``clamped`` marks coordinates that fell
        outside the image and were pulled back onto the border.
    """
    _check_size(height, width)
    py = _to_pixel_space(coords[..., 0], height)
    px = _to_pixel_space(coords[..., 1], width)
    rows = torch.ceil(py - 0.5).long()
    cols = torch.ceil(px - 0.5).long()
    clamped = (rows < 0) | (rows > height - 1) | (cols < 0) | (cols > width - 1)
    return rows.clamp(0, height - 1), cols.clamp(0, width - 1), clamped


def nearest_index(coord, height: int, width: int) -> PixelIndex:
    """Nearest pixel of a single (row, col) coordinate."""
    tensor = torch.as_tensor(coord, dtype=torch.float64).reshape(2)
    rows, cols, clamped = nearest_indices(tensor, height, width)
    return PixelIndex(int(rows), int(cols), bool(clamped))


def corner_neighbors(coords: torch.Tensor, lr_height: int, lr_width: int) -> QueryBundle:
    """
    Build the four-corner neighborhood of every query on the LR grid.

    :param coords: Query coordinates ``(B, N, 2)`` in [-1, 1].
    """
    _check_size(lr_height, lr_width)
    py = _to_pixel_space(coords[..., 0], lr_height)
    px = _to_pixel_space(coords[..., 1], lr_width)
    i0 = torch.floor(py).long()
    j0 = torch.floor(px).long()

    rows = torch.stack([i0, i0, i0 + 1, i0 + 1], dim=-1)
    cols = torch.stack([j0, j0 + 1, j0, j0 + 1], dim=-1)

    def center(index: torch.Tensor, size: int) -> torch.Tensor:
        return (2.0 * index.to(coords.dtype) + 1.0) / size - 1.0

    virtual = torch.stack([center(rows, lr_height), center(cols, lr_width)], dim=-1)
    rel = coords.unsqueeze(-2) - virtual

    rows_c = rows.clamp(0, lr_height - 1)
    cols_c = cols.clamp(0, lr_width - 1)
    row_centers = axis_centers(lr_height, coords.dtype).to(coords.device)
    col_centers = axis_centers(lr_width, coords.dtype).to(coords.device)
    corner_coords = torch.stack([row_centers[rows_c], col_centers[cols_c]], dim=-1)

    return QueryBundle(
        query_coords=coords,
        corner_indices=torch.stack([rows_c, cols_c], dim=-1),
        corner_coords=corner_coords,
        rel_coords=rel,
        lr_height=int(lr_height),
        lr_width=int(lr_width),
    )


def gather_codes(codes: torch.Tensor, rows: torch.Tensor, cols: torch.Tensor) -> torch.Tensor:
    """Pick codes at integer positions: ``(B, C, H, W)`` x ``(B, N)`` -> ``(B, N, C)``."""
    batch, channels, _, width = codes.shape
    flat_index = (rows * width + cols).reshape(batch, 1, -1)
    picked = codes.reshape(batch, channels, -1).gather(
        2, flat_index.expand(batch, channels, flat_index.shape[-1])
    )
    return picked.transpose(1, 2).reshape(*rows.shape, channels)


def cubic_kernel(t: torch.Tensor, a: float = CUBIC_A) -> torch.Tensor:
    """Keys cubic convolution kernel; a = -0.5 is Catmull-Rom."""
    t = t.abs()
    t2 = t * t
    t3 = t2 * t
    near = (a + 2.0) * t3 - (a + 3.0) * t2 + 1.0
    far = a * t3 - 5.0 * a * t2 + 8.0 * a * t - 4.0 * a
    return torch.where(t <= 1.0, near, torch.where(t < 2.0, far, torch.zeros_like(t)))


def reflect_index(index: torch.Tensor, size: int) -> torch.Tensor:
    """Half-sample symmetric reflection: -1 -> 0, -2 -> 1, size -> size - 1."""
    period = 2 * size
    folded = torch.remainder(index, period)
    return torch.where(folded >= size, period - 1 - folded, folded)


def _sample_bilinear(codes: torch.Tensor, coords: torch.Tensor) -> torch.Tensor:
    _, _, height, width = codes.shape
    py = _to_pixel_space(coords[..., 0], height)
    px = _to_pixel_space(coords[..., 1], width)
    i0 = torch.floor(py)
    j0 = torch.floor(px)
    ty = (py - i0).unsqueeze(-1)
    tx = (px - j0).unsqueeze(-1)
    i0 = i0.long()
    j0 = j0.long()
    r0, r1 = i0.clamp(0, height - 1), (i0 + 1).clamp(0, height - 1)
    c0, c1 = j0.clamp(0, width - 1), (j0 + 1).clamp(0, width - 1)
    top = gather_codes(codes, r0, c0) * (1.0 - tx) + gather_codes(codes, r0, c1) * tx
    bottom = gather_codes(codes, r1, c0) * (1.0 - tx) + gather_codes(codes, r1, c1) * tx
    return top * (1.0 - ty) + bottom * ty


def _sample_bicubic(codes: torch.Tensor, coords: torch.Tensor) -> torch.Tensor:
    _, _, height, width = codes.shape
    py = _to_pixel_space(coords[..., 0], height)
    px = _to_pixel_space(coords[..., 1], width)
    i0 = torch.floor(py)
    j0 = torch.floor(px)
    ty = py - i0
    tx = px - j0
    i0 = i0.long()
    j0 = j0.long()

    taps = (-1, 0, 1, 2)
    wy = [cubic_kernel(ty - k).unsqueeze(-1) for k in taps]
    wx = [cubic_kernel(tx - k).unsqueeze(-1) for k in taps]
    rows = [reflect_index(i0 + k, height) for k in taps]
    cols = [reflect_index(j0 + k, width) for k in taps]

    # unrolled accumulation keeps each output's arithmetic independent of batch size
    out = None
    for r, row_weight in zip(rows, wy):
        line = None
        for c, col_weight in zip(cols, wx):
            term = gather_codes(codes, r, c) * col_weight
            line = term if line is None else line + term
        term = line * row_weight
        out = term if out is None else out + term
    return out


def sample_latent(codes: torch.Tensor, coords: torch.Tensor, mode: str = "nearest") -> torch.Tensor:
    """
    Sample a code map at continuous coordinates.

    :param codes: Code map ``(B, C, H, W)``.
    :param coords: Coordinates ``(B, N, 2)``.
    :param mode: ``nearest`` | ``bilinear`` | ``bicubic``.
    :return: Sampled codes ``(B, N, C)``.
    """
    if codes.dim() != 4 or codes.shape[-1] < 1 or codes.shape[-2] < 1 or codes.shape[1] < 1:
        raise InvalidArgumentError(f"code map must be non-empty (B, C, H, W), got {tuple(codes.shape)}")
    if mode not in SAMPLING_MODES:
        raise InvalidArgumentError(f"unknown sampling mode '{mode}', expected {SAMPLING_MODES}")
    coords = coords.to(codes.dtype)
    if mode == "nearest":
        rows, cols, _ = nearest_indices(coords, codes.shape[-2], codes.shape[-1])
        return gather_codes(codes, rows, cols)
    if mode == "bilinear":
        return _sample_bilinear(codes, coords)
    return _sample_bicubic(codes, coords)
