"""
Typed run configuration.

Precedence is built-in defaults (the published training recipe) < YAML file < command-line overrides. Every
field is validated before any long-running work starts and the fully resolved
configuration is echoed into the run directory.
"""

from __future__ import annotations

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

import yaml
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from src.jiif import settings
from src.jiif.exceptions import ConfigError
from utils.ml_logging import get_logger

logger = get_logger()


class WeightStrategy(str, Enum):
    GRAPH_ATTENTION = "graph_attention"
    BILINEAR = "bilinear"
    DIRECT_REGRESSION = "direct_regression"


class DecoderMode(str, Enum):
    JOINT = "joint"
    SEPARATE = "separate"
    VALUE_ONLY = "value_only"


class NoiseDomain(str, Enum):
    # x is the (normalized) depth value itself
    DEPTH = "depth"
    # x = 1/d for disparity d
    INVERSE = "inverse"


class _StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=False)


class EncoderConfig(_StrictModel):
    """EDSR-baseline encoder hyper-parameters."""

    feature_dim: int = Field(settings.FEATURE_DIM, ge=1)
    num_residual_blocks: int = Field(16, ge=1)
    kernel_size: int = Field(3, ge=1)
    in_channels: int = Field(1, ge=1)

    @field_validator("kernel_size")
    @classmethod
    def _odd_kernel(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("kernel_size must be odd to preserve spatial size")
        return value


class ModelConfig(_StrictModel):
    feature_dim: int = Field(settings.FEATURE_DIM, ge=1)
    num_residual_blocks: int = Field(16, ge=1)
    kernel_size: int = Field(3, ge=1)
    decoder_hidden: Tuple[int, ...] = settings.DECODER_HIDDEN
    mode: DecoderMode = DecoderMode.JOINT
    weight_strategy: WeightStrategy = WeightStrategy.GRAPH_ATTENTION
    use_residual: bool = True
    chunk_size: int = Field(settings.SAMPLES_PER_PATCH, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _resolve_mode(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        strategy = data.get("weight_strategy", WeightStrategy.GRAPH_ATTENTION.value)
        strategy = getattr(strategy, "value", strategy)
        mode = data.get("mode")
        mode = getattr(mode, "value", mode)
        if strategy in (
            WeightStrategy.BILINEAR.value,
            WeightStrategy.DIRECT_REGRESSION.value,
        ):
            if mode == DecoderMode.SEPARATE.value:
                raise ValueError(
                    f"weight_strategy '{strategy}' has no learned weight head; "
                    "use mode 'value_only' (or 'joint', which resolves to it)"
                )
            if mode != DecoderMode.VALUE_ONLY.value:
                logger.info(
                    f"config=model weight_strategy={strategy} mode={mode or 'joint'} "
                    "resolved_mode=value_only"
                )
                data = {**data, "mode": DecoderMode.VALUE_ONLY.value}
        elif mode == DecoderMode.VALUE_ONLY.value:
            raise ValueError(
                "mode 'value_only' cannot learn graph-attention weights; "
                "use 'joint' or 'separate'"
            )
        return data

    @field_validator("kernel_size")
    @classmethod
    def _odd_kernel(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("kernel_size must be odd to preserve spatial size")
        return value

    @field_validator("decoder_hidden")
    @classmethod
    def _positive_hidden(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if not value or any(width < 1 for width in value):
            raise ValueError("decoder_hidden needs at least one positive width")
        return tuple(value)

    def encoder_config(self, in_channels: int) -> EncoderConfig:
        return EncoderConfig(
            feature_dim=self.feature_dim,
            num_residual_blocks=self.num_residual_blocks,
            kernel_size=self.kernel_size,
            in_channels=in_channels,
        )


class DegradationSpec(_StrictModel):
    """How LR inputs are generated from HR targets."""

    scale: int = Field(8, ge=1)
    noise_sigma: float = Field(0.0, ge=0.0)
    noise_domain: NoiseDomain = NoiseDomain.DEPTH


class DataConfig(_StrictModel):
    dataset: str = settings.SYNTHETIC
    root: str = settings.DATA_ROOT
    synthetic_count: int = Field(8, ge=1)
    synthetic_size: int = Field(128, ge=8)
    patch_size: int = Field(settings.PATCH_SIZE, ge=1)
    samples_per_patch: int = Field(settings.SAMPLES_PER_PATCH, ge=1)
    flip_probability: float = Field(0.5, ge=0.0, le=1.0)

    @field_validator("dataset")
    @classmethod
    def _known_dataset(cls, value: str) -> str:
        if value not in settings.DATASET_NAMES:
            raise ValueError(
                f"unknown dataset '{value}', expected one of {settings.DATASET_NAMES}"
            )
        return value

    @model_validator(mode="after")
    def _samples_fit_patch(self) -> "DataConfig":
        if self.samples_per_patch > self.patch_size * self.patch_size:
            raise ValueError(
                f"samples_per_patch={self.samples_per_patch} exceeds the "
                f"{self.patch_size}x{self.patch_size} patch pixel count"
            )
        return self


class TrainConfig(_StrictModel):
    epochs: int = Field(200, ge=1)
    batch_size: int = Field(1, ge=1)
    lr: float = Field(1e-4, gt=0.0)
    lr_decay_factor: float = Field(0.2, gt=0.0)
    lr_decay_epochs: int = Field(60, ge=1)
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = Field(1e-8, gt=0.0)
    max_steps: Optional[int] = Field(None, ge=1)
    checkpoint_every: int = Field(10, ge=1)
    log_every: int = Field(50, ge=1)

    @field_validator("betas")
    @classmethod
    def _betas_in_range(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if not all(0.0 <= beta < 1.0 for beta in value):
            raise ValueError("betas must lie in [0, 1)")
        return tuple(value)


class EvalConfig(_StrictModel):
    datasets: List[str] = Field(default_factory=lambda: [settings.SYNTHETIC])
    scales: List[int] = Field(default_factory=lambda: list(settings.BENCHMARK_SCALES))
    baseline: Optional[Literal["bicubic"]] = None
    checkpoint: Optional[str] = None
    crop_border: int = Field(0, ge=0)
    save_maps: bool = False

    @field_validator("datasets")
    @classmethod
    def _known_datasets(cls, value: List[str]) -> List[str]:
        unknown = [name for name in value if name not in settings.DATASET_NAMES]
        if unknown:
            raise ValueError(f"unknown datasets {unknown}")
        return value

    @field_validator("scales")
    @classmethod
    def _positive_scales(cls, value: List[int]) -> List[int]:
        if not value or any(scale < 1 for scale in value):
            raise ValueError("scales must be a non-empty list of positive integers")
        return value


class RunConfig(_StrictModel):
    """Merged view of everything a command needs."""

    run_name: str = "jiif"
    output_dir: str = settings.RUNS_DIR
    seed: int = Field(0, ge=0)
    model: ModelConfig = Field(default_factory=ModelConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    degradation: DegradationSpec = Field(default_factory=DegradationSpec)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @property
    def run_dir(self) -> Path:
        return Path(self.output_dir) / self.run_name

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)


def _deep_merge(base: Dict[str, Any], update: Mapping[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _expand_dotted(overrides: Mapping[str, Any]) -> Dict[str, Any]:
    nested: Dict[str, Any] = {}
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = nested
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return nested


def _format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        location = ".".join(str(part) for part in err["loc"]) or "<root>"
        lines.append(f"field '{location}': {err['msg']}")
    return "; ".join(lines)


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    config_path = Path(path).expanduser().resolve()
    if not config_path.is_file():
        raise ConfigError(f"Config file not found: {config_path}")
    try:
        with config_path.open("r", encoding="utf-8") as fh:
            content = yaml.safe_load(fh) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"Failed to parse YAML config {config_path}: {e}") from e
    if not isinstance(content, dict):
        raise ConfigError(f"Config file {config_path} must contain a mapping")
    return content


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Resolve a run configuration.

    :param path: Optional YAML file layered over the built-in defaults.
    :param overrides: Dotted keys (``"train.epochs"``) layered over the file; ``None``
        values are ignored so unset command-line flags never mask file values.
    :return: The validated configuration.
    :raises ConfigError: With a field-level message when validation fails.
    """
    raw: Dict[str, Any] = {}
    if path is not None:
        raw = read_config_file(path)
    if overrides:
        raw = _deep_merge(raw, _expand_dotted(overrides))
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        message = _format_validation_error(e)
        logger.error(f"config=invalid detail=\"{message}\"")
        raise ConfigError(message) from e


def save_resolved_config(config: RunConfig, path: Union[str, Path]) -> Path:
    out_path = Path(path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(config.to_yaml(), encoding="utf-8")
    return out_path
