"""
LR generation: bicubic down-sampling plus optional conditional Gaussian noise whose
standard deviation is proportional to a per-pixel value proxy x.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import torch

from src.jiif.config import DegradationSpec, NoiseDomain
from src.jiif.data.pairs import (
    DepthStats,
    RGBDPair,
    center_crop_to_multiple,
    denormalize,
    depth_stats,
    normalize_with,
)
from src.jiif.exceptions import InvalidArgumentError
from src.jiif.interpolation import bicubic_downsample
from src.jiif.seeding import torch_generator
from utils.ml_logging import get_logger

logger = get_logger()


@dataclass(frozen=True)
class DegradedDepth:
    lr_depth: torch.Tensor  # (1, h, w), same units as the HR depth
    skipped: torch.Tensor  # (1, h, w) bool, zero-disparity pixels left un-noised
    hr_pair: RGBDPair  # the HR pair after center-cropping to a multiple of scale
    scale: int


def add_depth_noise(
    values: torch.Tensor,
    sigma: float,
    domain: Union[NoiseDomain, str],
    generator: torch.Generator,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Add ``n ~ N(0, sigma * x)`` per pixel and clamp at 0.

    ``depth`` domain: x is the value itself. ``inverse`` domain: values are
    disparities d and x = 1/d; pixels with d = 0 are skipped and flagged.

    :return: ``(noisy, skipped)``.
    """
    if sigma < 0:
        raise InvalidArgumentError(f"noise sigma must be non-negative, got {sigma}")
    domain = NoiseDomain(domain)
    skipped = torch.zeros_like(values, dtype=torch.bool)
    if sigma == 0:
        return values.clone(), skipped

    work = values.to(torch.float64)
    if domain == NoiseDomain.DEPTH:
        proxy = work
    else:
        skipped = work == 0
        safe = torch.where(skipped, torch.ones_like(work), work)
        proxy = torch.where(skipped, torch.zeros_like(work), 1.0 / safe)
    noise = torch.randn(work.shape, generator=generator, dtype=torch.float64) * (sigma * proxy)
    noisy = torch.where(skipped, work, (work + noise).clamp_min(0.0))
    return noisy.to(values.dtype), skipped


def degrade(
    pair: RGBDPair,
    spec: DegradationSpec,
    seed: int,
    stats: Optional[DepthStats] = None,
) -> DegradedDepth:
    """
    Produce the LR depth of a pair.

    :param pair: HR pair; it is center-cropped to a multiple of ``spec.scale`` first.
    :param spec: Scale and noise parameters.
    :param seed: Seed of the noise draw.
    :param stats: Normalization statistics for the ``depth`` noise domain; defaults
        to the cropped HR depth's own min/max.
    """
    hr_pair = center_crop_to_multiple(pair, spec.scale)
    lr = bicubic_downsample(hr_pair.depth.to(torch.float64), spec.scale)
    skipped = torch.zeros_like(lr, dtype=torch.bool)

    if spec.noise_sigma > 0:
        generator = torch_generator(int(seed), "noise")
        if NoiseDomain(spec.noise_domain) == NoiseDomain.DEPTH:
            stats = stats or depth_stats(hr_pair.depth)
            x = normalize_with(lr, stats)
            noisy, skipped = add_depth_noise(x, spec.noise_sigma, spec.noise_domain, generator)
            lr = denormalize(noisy, stats) if not stats.degenerate else lr
        else:
            lr, skipped = add_depth_noise(lr, spec.noise_sigma, spec.noise_domain, generator)
        n_skipped = int(skipped.sum())
        if n_skipped:
            logger.warning(f"degrade=zero_disparity pair={pair.name} skipped_pixels={n_skipped}")

    return DegradedDepth(
        lr_depth=lr.to(pair.depth.dtype), skipped=skipped, hr_pair=hr_pair, scale=spec.scale
    )
