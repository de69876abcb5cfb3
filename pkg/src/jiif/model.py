"""
Two encoders and one implicit decoder assembled into the trainable network.

Resolution only enters through coordinates, so one parameter set serves every
integer scale. With residual learning enabled the decoder predicts a correction
on top of the bicubic up-sampled LR depth, both in normalized depth space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import torch
from torch import nn

from src.jiif.config import ModelConfig, WeightStrategy
from src.jiif.coordgrid import make_coord_grid, sample_latent
from src.jiif.decoder import DECODE_TILE, JIIFDecoder, build_decoder, query_pixel
from src.jiif.encoders import EDSREncoder, LatentCodeMap, build_encoder, encode
from src.jiif.exceptions import InvalidArgumentError
from src.jiif.seeding import derive_seed
from utils.ml_logging import get_logger

logger = get_logger()

GUIDE_CHANNELS = 3
DEPTH_CHANNELS = 1


def _batched(image: torch.Tensor, name: str) -> torch.Tensor:
    if image.dim() == 3:
        return image.unsqueeze(0)
    if image.dim() != 4:
        raise InvalidArgumentError(f"{name} must be (C, H, W) or (B, C, H, W), got {tuple(image.shape)}")
    return image


def infer_scale(lr_depth: torch.Tensor, hr_guide: torch.Tensor) -> int:
    """Integer up-sampling factor between an LR depth and its HR guide."""
    lr_h, lr_w = lr_depth.shape[-2:]
    hr_h, hr_w = hr_guide.shape[-2:]
    if lr_h < 1 or lr_w < 1 or hr_h % lr_h or hr_w % lr_w or hr_h // lr_h != hr_w // lr_w:
        raise InvalidArgumentError(
            f"LR depth {lr_h}x{lr_w} and HR guide {hr_h}x{hr_w} are not related by one integer scale"
        )
    return hr_h // lr_h


@dataclass(frozen=True)
class WeightInspection:
    """Learned interpolation weights of one HR pixel."""

    pixel: Tuple[int, int]
    query_coord: List[float]
    corner_indices: List[List[int]]
    corner_coords: List[List[float]]
    weights: List[float]
    values: List[float]

    def to_dict(self) -> dict:
        return {
            "pixel": list(self.pixel),
            "query_coord": self.query_coord,
            "corners": [
                {"index": index, "coord": coord, "weight": weight, "value": value}
                for index, coord, weight, value in zip(
                    self.corner_indices, self.corner_coords, self.weights, self.values
                )
            ],
        }


class JIIFModel(nn.Module):
    def __init__(
        self,
        input_encoder: EDSREncoder,
        guide_encoder: EDSREncoder,
        decoder: JIIFDecoder,
        weight_strategy: WeightStrategy = WeightStrategy.GRAPH_ATTENTION,
        use_residual: bool = True,
        chunk_size: int = 30720,
    ):
        super().__init__()
        self.input_encoder = input_encoder
        self.guide_encoder = guide_encoder
        self.decoder = decoder
        self.weight_strategy = WeightStrategy(weight_strategy)
        self.use_residual = use_residual
        self.chunk_size = chunk_size

    def encode_pair(
        self, lr_depth: torch.Tensor, hr_guide: torch.Tensor
    ) -> Tuple[LatentCodeMap, LatentCodeMap, int]:
        lr_depth = _batched(lr_depth, "lr_depth")
        hr_guide = _batched(hr_guide, "hr_guide")
        if lr_depth.shape[0] != hr_guide.shape[0]:
            raise InvalidArgumentError("lr_depth and hr_guide must share the batch size")
        scale = infer_scale(lr_depth, hr_guide)
        z_map = encode(self.input_encoder, lr_depth, source="input")
        g_map = encode(self.guide_encoder, hr_guide, source="guide")
        return z_map, g_map, scale

    def _decode(
        self,
        z_map: LatentCodeMap,
        g_map: LatentCodeMap,
        lr_depth: torch.Tensor,
        queries: torch.Tensor,
        scale: int,
        base: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        out = query_pixel(
            self.decoder, z_map, g_map, queries, strategy=self.weight_strategy, scale=scale
        )
        if not self.use_residual:
            return out
        if base is None:
            base = sample_latent(lr_depth, queries, "bicubic")[..., 0]
        return base + out

    def forward(
        self,
        lr_depth: torch.Tensor,
        hr_guide: torch.Tensor,
        queries: torch.Tensor,
        base: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """
        Predict normalized depth at continuous HR coordinates.

        :param lr_depth: Normalized LR depth ``(B, 1, h, w)``.
        :param hr_guide: RGB guide ``(B, 3, H, W)`` in [0, 1].
        :param queries: Coordinates ``(B, N, 2)`` in [-1, 1].
        :param base: Optional precomputed bicubic base at the queries ``(B, N)``.
        :return: Predictions ``(B, N)``.
        """
        lr_depth = _batched(lr_depth, "lr_depth")
        if queries.dim() == 2:
            queries = queries.unsqueeze(0)
        z_map, g_map, scale = self.encode_pair(lr_depth, hr_guide)
        return self._decode(z_map, g_map, lr_depth, queries.to(lr_depth.dtype), scale, base)

    @torch.no_grad()
    def full_inference(
        self,
        lr_depth: torch.Tensor,
        hr_guide: torch.Tensor,
        chunk_size: Optional[int] = None,
    ) -> torch.Tensor:
        """
        Query every HR pixel center and assemble the HR depth map ``(B, 1, H, W)``.

        The encoders run once; decoding is batched over ``chunk_size`` queries,
        rounded up to whole decoder tiles. Queries are padded to a whole tile so
        every decoder matmul sees the same rows whatever the chunk size, which
        keeps the output bitwise identical across chunk sizes.
        """
        chunk = self.chunk_size if chunk_size is None else int(chunk_size)
        if chunk < 1:
            raise InvalidArgumentError(f"chunk_size must be positive, got {chunk}")
        chunk = -(-chunk // DECODE_TILE) * DECODE_TILE
        single = lr_depth.dim() == 3
        lr_depth = _batched(lr_depth, "lr_depth")
        z_map, g_map, scale = self.encode_pair(lr_depth, hr_guide)
        height, width = g_map.height, g_map.width
        coords = make_coord_grid(height, width, lr_depth.dtype).flatten().to(lr_depth.device)
        coords = coords.unsqueeze(0).expand(lr_depth.shape[0], -1, -1)
        n_queries = coords.shape[1]
        pad = -n_queries % DECODE_TILE
        if pad:
            coords = torch.cat([coords, coords[:, -1:].expand(-1, pad, -1)], dim=1)

        pieces = [
            self._decode(z_map, g_map, lr_depth, coords[:, start : start + chunk], scale)
            for start in range(0, coords.shape[1], chunk)
        ]
        out = torch.cat(pieces, dim=1)[:, :n_queries].reshape(lr_depth.shape[0], 1, height, width)
        return out.squeeze(0) if single else out

    @torch.no_grad()
    def inspect_weights(
        self, lr_depth: torch.Tensor, hr_guide: torch.Tensor, pixel: Sequence[int]
    ) -> WeightInspection:
        """Corner indices, coordinates, weights and decoded values behind one HR pixel."""
        lr_depth = _batched(lr_depth, "lr_depth")[:1]
        hr_guide = _batched(hr_guide, "hr_guide")[:1]
        z_map, g_map, scale = self.encode_pair(lr_depth, hr_guide)
        row, col = int(pixel[0]), int(pixel[1])
        if not (0 <= row < g_map.height and 0 <= col < g_map.width):
            raise InvalidArgumentError(
                f"pixel ({row}, {col}) lies outside the {g_map.height}x{g_map.width} guide"
            )
        coord = make_coord_grid(g_map.height, g_map.width, lr_depth.dtype).coords[row, col]
        query = coord.reshape(1, 1, 2).to(lr_depth.device)
        _, interp, bundle = query_pixel(
            self.decoder,
            z_map,
            g_map,
            query,
            strategy=self.weight_strategy,
            scale=scale,
            return_bundle=True,
        )
        return WeightInspection(
            pixel=(row, col),
            query_coord=coord.tolist(),
            corner_indices=bundle.corner_indices[0, 0].tolist(),
            corner_coords=bundle.corner_coords[0, 0].tolist(),
            weights=interp.weights[0, 0].tolist(),
            values=interp.values[0, 0].tolist(),
        )

    @torch.no_grad()
    def zero_decoder_(self) -> "JIIFModel":
        """Zero every decoder parameter in place; the residual branch then returns bicubic."""
        for param in self.decoder.parameters():
            param.zero_()
        return self


def build_model(config: ModelConfig, seed: int) -> JIIFModel:
    """
    Build the network with per-component seeds split from ``seed``.

    :param config: Model hyper-parameters.
    :param seed: Root seed; the encoders and decoder draw from their own streams.
    """
    model = JIIFModel(
        input_encoder=build_encoder(
            config.encoder_config(DEPTH_CHANNELS), derive_seed(seed, "encoder.input")
        ),
        guide_encoder=build_encoder(
            config.encoder_config(GUIDE_CHANNELS), derive_seed(seed, "encoder.guide")
        ),
        decoder=build_decoder(config, derive_seed(seed, "decoder")),
        weight_strategy=config.weight_strategy,
        use_residual=config.use_residual,
        chunk_size=config.chunk_size,
    )
    n_params = sum(p.numel() for p in model.parameters())
    logger.info(
        f"model=built mode={config.mode.value} strategy={config.weight_strategy.value} "
        f"residual={config.use_residual} params={n_params}"
    )
    return model
