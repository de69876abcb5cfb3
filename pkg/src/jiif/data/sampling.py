"""
Training patches: random HR crop, joint flips, LR generation and query sampling.
"""

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
import torch

from src.jiif import settings
from src.jiif.config import DegradationSpec
from src.jiif.coordgrid import make_coord_grid
from src.jiif.data.degradation import degrade
from src.jiif.data.pairs import DepthStats, RGBDPair, depth_stats, flip_pair, normalize_with
from src.jiif.exceptions import InvalidArgumentError
from src.jiif.interpolation import bicubic_resample


@dataclass(frozen=True)
class TrainingSample:
    lr_depth: torch.Tensor  # (1, h, w) normalized
    hr_guide: torch.Tensor  # (3, P, P)
    hr_depth: torch.Tensor  # (1, P, P) normalized
    query_coords: torch.Tensor  # (N, 2)
    query_indices: torch.Tensor  # (N,) flat pixel index into the patch
    target_values: torch.Tensor  # (N,)
    bicubic_base: torch.Tensor  # (N,)
    crop: Tuple[int, int]
    flips: Tuple[bool, bool]
    stats: DepthStats


def _pad_to(pair: RGBDPair, size: int) -> RGBDPair:
    pad_h = max(0, size - pair.height)
    pad_w = max(0, size - pair.width)
    if not pad_h and not pad_w:
        return pair
    widths = ((0, 0), (pad_h // 2, pad_h - pad_h // 2), (pad_w // 2, pad_w - pad_w // 2))

    def pad(image: torch.Tensor) -> torch.Tensor:
        return torch.from_numpy(np.pad(image.numpy(), widths, mode="reflect"))

    return RGBDPair(
        guide=pad(pair.guide),
        depth=pad(pair.depth),
        value_kind=pair.value_kind,
        name=pair.name,
        scale_factor=pair.scale_factor,
    )


def sample_training_patch(
    pair: RGBDPair,
    spec: DegradationSpec,
    seed: int,
    patch_size: int = settings.PATCH_SIZE,
    samples: int = settings.SAMPLES_PER_PATCH,
    flip_probability: float = 0.5,
) -> TrainingSample:
    """
    Draw one training sample.

    Images smaller than the patch are reflect-padded. The patch side is rounded
    down to a multiple of the scale; queries are distinct HR pixel centers.
    Normalization uses the whole image's min/max.
    """
    patch = patch_size - patch_size % spec.scale
    if patch < spec.scale:
        raise InvalidArgumentError(f"patch_size {patch_size} is smaller than scale {spec.scale}")
    if samples > patch * patch:
        raise InvalidArgumentError(f"{samples} samples exceed the {patch}x{patch} patch")

    rng = np.random.default_rng(seed)
    stats = depth_stats(pair.depth)
    padded = _pad_to(pair, patch)
    top = int(rng.integers(0, padded.height - patch + 1))
    left = int(rng.integers(0, padded.width - patch + 1))
    vertical = bool(rng.random() < flip_probability)
    horizontal = bool(rng.random() < flip_probability)
    crop = flip_pair(padded.crop(top, left, patch, patch), vertical, horizontal)

    degraded = degrade(crop, spec, int(rng.integers(0, 2**63 - 1)), stats=stats)
    hr_depth = normalize_with(crop.depth, stats)
    lr_depth = normalize_with(degraded.lr_depth, stats)

    indices = torch.from_numpy(rng.choice(patch * patch, size=samples, replace=False))
    coords = make_coord_grid(patch, patch, hr_depth.dtype).flatten()[indices]
    base = bicubic_resample(lr_depth, patch, patch).reshape(-1)[indices]

    return TrainingSample(
        lr_depth=lr_depth,
        hr_guide=crop.guide.contiguous(),
        hr_depth=hr_depth,
        query_coords=coords,
        query_indices=indices,
        target_values=hr_depth.reshape(-1)[indices],
        bicubic_base=base,
        crop=(top, left),
        flips=(vertical, horizontal),
        stats=stats,
    )


def collate(samples: Sequence[TrainingSample]) -> Dict[str, torch.Tensor]:
    """Stack equally shaped samples into a batch."""
    return {
        "lr_depth": torch.stack([s.lr_depth for s in samples]),
        "hr_guide": torch.stack([s.hr_guide for s in samples]),
        "query_coords": torch.stack([s.query_coords for s in samples]),
        "target_values": torch.stack([s.target_values for s in samples]),
        "bicubic_base": torch.stack([s.bicubic_base for s in samples]),
    }
