"""
The joint implicit image function.

A query pixel is interpolated from its four LR corners. For every corner the
decoder predicts an interpolation value and (in graph-attention mode) an
asymmetric edge logit from the corner's guide code and the query's guide code;
logits are softmax-normalized over the four corners.

Three decoder layouts exist:

* ``joint``: one MLP maps ``[z_i, g_i, g_q - g_i, x_q - x_i]`` to ``(value, logit)``.
* ``separate``: a value MLP on ``[z_i, g_i, x_q - x_i]`` and a weight MLP on
  ``[g_i, g_q - g_i]`` with the same hidden widths.
* ``value_only``: the value MLP alone, for bilinear or directly regressed weights.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence, Tuple, Union

import torch
import torch.nn.functional as F
from torch import nn

from src.jiif.config import DecoderMode, ModelConfig, WeightStrategy
from src.jiif.coordgrid import QueryBundle, corner_neighbors, gather_codes, sample_latent
from src.jiif.encoders import LatentCodeMap
from src.jiif.exceptions import InvalidArgumentError, InvalidStateError, NumericError
from src.jiif.interpolation import InterpolationBundle, bilinear_bundle, weighted_interpolate

# Rows per decoder matmul; every call has exactly this shape.
DECODE_TILE = 4096


def tiled_rows(fn: Callable[[torch.Tensor], torch.Tensor], x: torch.Tensor) -> torch.Tensor:
    """Apply ``fn`` over the rows of ``x`` in ``DECODE_TILE`` blocks, zero-padding the last block."""
    shape = x.shape[:-1]
    rows = x.reshape(-1, x.shape[-1])
    n_rows = rows.shape[0]
    pad = -n_rows % DECODE_TILE
    if pad:
        rows = torch.cat([rows, rows.new_zeros(pad, rows.shape[-1])])
    out = torch.cat([fn(block) for block in rows.split(DECODE_TILE)])
    return out[:n_rows].reshape(*shape, -1)


class MLP(nn.Module):
    """Affine layers with ReLU between them; no activation on the output."""

    def __init__(self, in_dim: int, out_dim: int, hidden_list: Sequence[int]):
        super().__init__()
        layers = []
        last_dim = in_dim
        for hidden in hidden_list:
            layers.append(nn.Linear(last_dim, hidden))
            layers.append(nn.ReLU())
            last_dim = hidden
        layers.append(nn.Linear(last_dim, out_dim))
        self.in_dim = in_dim
        self.layers = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return tiled_rows(self.layers, x)


class JIIFDecoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.feature_dim = config.feature_dim
        self.mode = DecoderMode(config.mode)
        self.weight_strategy = WeightStrategy(config.weight_strategy)
        hidden = tuple(config.decoder_hidden)
        feat = config.feature_dim

        if self.mode == DecoderMode.JOINT:
            self.joint_net = MLP(3 * feat + 2, 2, hidden)
        else:
            self.value_net = MLP(2 * feat + 2, 1, hidden)
            if self.mode == DecoderMode.SEPARATE:
                self.weight_net = MLP(2 * feat, 1, hidden)
        if self.weight_strategy == WeightStrategy.DIRECT_REGRESSION:
            self.direct_head = nn.Linear(feat, 4)

    def _check_dims(self, **inputs: torch.Tensor) -> None:
        expected = {"z_i": self.feature_dim, "g_i": self.feature_dim, "g_rel": self.feature_dim, "x_rel": 2}
        for name, tensor in inputs.items():
            if tensor.shape[-1] != expected[name]:
                raise InvalidArgumentError(
                    f"{name} must have trailing dimension {expected[name]}, got {tuple(tensor.shape)}"
                )

    def decode_joint(
        self, z_i: torch.Tensor, g_i: torch.Tensor, g_rel: torch.Tensor, x_rel: torch.Tensor
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """Return ``(logit, value)`` from the unified network."""
        if self.mode != DecoderMode.JOINT:
            raise InvalidStateError(f"decode_joint needs mode 'joint', decoder is '{self.mode.value}'")
        self._check_dims(z_i=z_i, g_i=g_i, g_rel=g_rel, x_rel=x_rel)
        out = self.joint_net(torch.cat([z_i, g_i, g_rel, x_rel], dim=-1))
        return out[..., 1], out[..., 0]

    def decode_value(self, z_i: torch.Tensor, g_i: torch.Tensor, x_rel: torch.Tensor) -> torch.Tensor:
        if self.mode == DecoderMode.JOINT:
            raise InvalidStateError("decode_value needs mode 'separate' or 'value_only'")
        self._check_dims(z_i=z_i, g_i=g_i, x_rel=x_rel)
        return self.value_net(torch.cat([z_i, g_i, x_rel], dim=-1))[..., 0]

    def decode_weight(self, g_i: torch.Tensor, g_rel: torch.Tensor) -> torch.Tensor:
        if self.mode != DecoderMode.SEPARATE:
            raise InvalidStateError(f"decode_weight needs mode 'separate', decoder is '{self.mode.value}'")
        self._check_dims(g_i=g_i, g_rel=g_rel)
        return self.weight_net(torch.cat([g_i, g_rel], dim=-1))[..., 0]

    def regress_logits(self, g_q: torch.Tensor) -> torch.Tensor:
        """Four corner logits straight from the query's guide code (ablation)."""
        if self.weight_strategy != WeightStrategy.DIRECT_REGRESSION:
            raise InvalidStateError("regress_logits needs weight_strategy 'direct_regression'")
        self._check_dims(g_i=g_q)
        return tiled_rows(self.direct_head, g_q)


def build_decoder(config: ModelConfig, seed: int) -> JIIFDecoder:
    """Seeded decoder construction (default fan-in uniform init); global RNG untouched."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return JIIFDecoder(config)


def normalize_weights(logits: torch.Tensor) -> torch.Tensor:
    """
    Softmax over the trailing corner axis.

    :raises NumericError: When a logit is NaN.
    """
    if torch.isnan(logits).any():
        raise NumericError("NaN interpolation logit")
    return F.softmax(logits, dim=-1)


def query_pixel(
    decoder: JIIFDecoder,
    z_map: Union[LatentCodeMap, torch.Tensor],
    g_map: Union[LatentCodeMap, torch.Tensor],
    coords: torch.Tensor,
    strategy: Optional[Union[WeightStrategy, str]] = None,
    scale: Optional[int] = None,
    return_bundle: bool = False,
):
    """
    Interpolate HR queries from LR latent codes guided by HR guide codes.

    :param decoder: The decoder holding value/weight networks.
    :param z_map: LR-sized input codes ``(B, C, h, w)``.
    :param g_map: HR-sized guide codes ``(B, C, H, W)``.
    :param coords: Query coordinates ``(B, N, 2)``.
    :param strategy: Weight strategy; defaults to the decoder's configured one.
    :param scale: When given, ``H == scale * h`` and ``W == scale * w`` are enforced.
    :param return_bundle: Also return the per-corner :class:`InterpolationBundle`
        and :class:`QueryBundle`.
    :return: Interpolated values ``(B, N)``.
    """
    z = z_map.codes if isinstance(z_map, LatentCodeMap) else z_map
    g = g_map.codes if isinstance(g_map, LatentCodeMap) else g_map
    strategy = WeightStrategy(strategy or decoder.weight_strategy)

    lr_h, lr_w = z.shape[-2:]
    hr_h, hr_w = g.shape[-2:]
    if z.shape[0] != g.shape[0] or coords.shape[0] != z.shape[0]:
        raise InvalidArgumentError("code maps and queries must share the batch size")
    if scale is not None and (hr_h != scale * lr_h or hr_w != scale * lr_w):
        raise InvalidArgumentError(
            f"guide codes {hr_h}x{hr_w} do not match LR codes {lr_h}x{lr_w} at scale {scale}"
        )

    coords = coords.to(z.dtype)
    batch, n_queries = coords.shape[:2]
    bundle = corner_neighbors(coords, lr_h, lr_w)
    rows, cols = bundle.corner_indices[..., 0], bundle.corner_indices[..., 1]

    z_i = gather_codes(z, rows, cols)
    g_i = sample_latent(g, bundle.corner_coords.reshape(batch, n_queries * 4, 2), "bicubic")
    g_i = g_i.reshape(batch, n_queries, 4, -1)
    g_q = sample_latent(g, coords, "nearest")
    g_rel = g_q.unsqueeze(-2) - g_i

    cell = torch.tensor([lr_h, lr_w], dtype=z.dtype, device=z.device)
    x_rel = bundle.rel_coords * cell

    if strategy == WeightStrategy.GRAPH_ATTENTION:
        if decoder.mode == DecoderMode.JOINT:
            logits, values = decoder.decode_joint(z_i, g_i, g_rel, x_rel)
        elif decoder.mode == DecoderMode.SEPARATE:
            values = decoder.decode_value(z_i, g_i, x_rel)
            logits = decoder.decode_weight(g_i, g_rel)
        else:
            raise InvalidStateError("graph_attention weights need a 'joint' or 'separate' decoder")
        interp = InterpolationBundle(weights=normalize_weights(logits), values=values)
    elif strategy == WeightStrategy.BILINEAR:
        interp = bilinear_bundle(bundle, _values_for(decoder, z_i, g_i, x_rel))
    else:
        values = _values_for(decoder, z_i, g_i, x_rel)
        logits = decoder.regress_logits(g_q)
        interp = InterpolationBundle(weights=normalize_weights(logits), values=values)

    out = weighted_interpolate(interp.weights, interp.values)
    if return_bundle:
        return out, interp, bundle
    return out


def _values_for(
    decoder: JIIFDecoder, z_i: torch.Tensor, g_i: torch.Tensor, x_rel: torch.Tensor
) -> torch.Tensor:
    if decoder.mode == DecoderMode.JOINT:
        g_rel = torch.zeros_like(g_i)
        return decoder.decode_joint(z_i, g_i, g_rel, x_rel)[1]
    return decoder.decode_value(z_i, g_i, x_rel)


__all__ = [
    "DECODE_TILE",
    "MLP",
    "JIIFDecoder",
    "QueryBundle",
    "build_decoder",
    "normalize_weights",
    "query_pixel",
    "tiled_rows",
]
