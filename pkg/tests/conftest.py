from typing import Any, Callable, Dict

import pytest
import torch
import yaml

from src.jiif.config import ModelConfig, RunConfig
from src.jiif.data import RGBDPair, generate_synthetic
from src.jiif.model import JIIFModel, build_model

TINY_MODEL: Dict[str, Any] = {
    "feature_dim": 8,
    "num_residual_blocks": 1,
    "decoder_hidden": [16, 16],
    "chunk_size": 64,
}

TINY_RUN: Dict[str, Any] = {
    "model": TINY_MODEL,
    "data": {
        "dataset": "synthetic",
        "synthetic_count": 2,
        "synthetic_size": 32,
        "patch_size": 16,
        "samples_per_patch": 64,
    },
    "degradation": {"scale": 4},
    "train": {"epochs": 1, "lr": 1e-3, "checkpoint_every": 1, "log_every": 1},
    "eval": {"datasets": ["synthetic"], "scales": [4]},
}


def _merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


@pytest.fixture
def tiny_model_config() -> ModelConfig:
    return ModelConfig(**TINY_MODEL)


@pytest.fixture
def make_model() -> Callable[..., JIIFModel]:
    def factory(seed: int = 0, **fields: Any) -> JIIFModel:
        return build_model(ModelConfig(**{**TINY_MODEL, **fields}), seed)

    return factory


@pytest.fixture
def make_run_config(tmp_path) -> Callable[..., RunConfig]:
    """Tiny run configs rooted in the test's temporary directory."""

    def factory(**sections: Any) -> RunConfig:
        raw = _merge(TINY_RUN, {"output_dir": str(tmp_path / "runs"), **sections})
        return RunConfig.model_validate(raw)

    return factory


@pytest.fixture
def synthetic_pairs():
    return generate_synthetic(3, seed=11, size=32, split="test")


@pytest.fixture
def ramp_pair() -> RGBDPair:
    """16x16 pair whose depth is a diagonal ramp from 100 to 250 cm."""
    yy, xx = torch.meshgrid(torch.arange(16.0), torch.arange(16.0), indexing="ij")
    depth = 100.0 + 5.0 * yy + 5.0 * xx
    guide = torch.stack([yy / 15.0, xx / 15.0, torch.full_like(yy, 0.5)])
    return RGBDPair(guide=guide, depth=depth[None], name="ramp")


@pytest.fixture
def config_file(tmp_path):
    def write(content: str):
        path = tmp_path / "config.yaml"
        path.write_text(content, encoding="utf-8")
        return path

    return write


@pytest.fixture
def tiny_config_path(tmp_path):
    """TINY_RUN written as a YAML run config."""
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(TINY_RUN, sort_keys=False), encoding="utf-8")
    return path
