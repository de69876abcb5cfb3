"""
EDSR-baseline feature extractors without up-sampling tails.

Both encoders keep the spatial size of their input: one produces the input
latent codes z from the LR depth, the other the guide codes g from the HR RGB.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from src.jiif.config import EncoderConfig
from src.jiif.coordgrid import CoordGrid, make_coord_grid, sample_latent
from src.jiif.exceptions import InvalidArgumentError


def conv(in_channels: int, out_channels: int, kernel_size: int, bias: bool = True) -> nn.Conv2d:
    return nn.Conv2d(
        in_channels, out_channels, kernel_size, stride=1, padding=kernel_size // 2, bias=bias
    )


class ResBlock(nn.Module):
    """conv - ReLU - conv with an identity skip, no residual scaling."""

    def __init__(self, n_feats: int, kernel_size: int):
        super().__init__()
        self.body = nn.Sequential(
            conv(n_feats, n_feats, kernel_size),
            nn.ReLU(inplace=True),
            conv(n_feats, n_feats, kernel_size),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x) + x


class EDSREncoder(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        self.out_dim = config.feature_dim
        self.head = conv(config.in_channels, config.feature_dim, config.kernel_size)
        self.body = nn.Sequential(
            *[
                ResBlock(config.feature_dim, config.kernel_size)
                for _ in range(config.num_residual_blocks)
            ]
        )
        self.tail = conv(config.feature_dim, config.feature_dim, config.kernel_size)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        feat = self.head(x)
        return self.tail(self.body(feat)) + feat


@dataclass(frozen=True)
class LatentCodeMap:
    """Encoder output ``(B, C, H, W)`` tagged with the image it came from."""

    codes: torch.Tensor
    source: str

    @property
    def height(self) -> int:
        return self.codes.shape[-2]

    @property
    def width(self) -> int:
        return self.codes.shape[-1]

    @property
    def feature_dim(self) -> int:
        return self.codes.shape[1]

    @property
    def grid(self) -> CoordGrid:
        return make_coord_grid(self.height, self.width, self.codes.dtype)

    def sample(self, coords: torch.Tensor, mode: str = "nearest") -> torch.Tensor:
        return sample_latent(self.codes, coords, mode)


def build_encoder(config: EncoderConfig, seed: int) -> EDSREncoder:
    """
    Build an encoder with seeded default initialization.

    The global torch RNG state is restored afterwards.
    """
    if config.feature_dim < 1 or config.num_residual_blocks < 1:
        raise InvalidArgumentError(f"invalid encoder config: {config}")
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return EDSREncoder(config)


def encode(encoder: EDSREncoder, image: torch.Tensor, source: str = "input") -> LatentCodeMap:
    """
    Run an encoder on ``(C, H, W)`` or ``(B, C, H, W)`` and wrap the result.

    :raises InvalidArgumentError: When the channel count does not match the encoder.
    """
    batched = image if image.dim() == 4 else image.unsqueeze(0)
    if batched.dim() != 4 or batched.shape[1] != encoder.config.in_channels:
        raise InvalidArgumentError(
            f"{source} encoder expects {encoder.config.in_channels} channels, "
            f"got image of shape {tuple(image.shape)}"
        )
    return LatentCodeMap(codes=encoder(batched), source=source)
