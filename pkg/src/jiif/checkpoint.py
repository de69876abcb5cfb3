"""
Checkpoint archive.

A checkpoint is a zip file with fixed timestamps and sorted entries:

    header.yaml                   epoch, step, seed, resolved config, parameter
                                  order and optimizer hyper-parameters
    params/<name>.npy             little-endian parameter arrays
    optimizer/<index>/<key>.npy   little-endian optimizer state tensors

Saving the same state twice yields byte-identical files.
"""

from __future__ import annotations

import io
import os
import zipfile
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import torch
import yaml

from src.jiif.config import RunConfig
from src.jiif.exceptions import CheckpointError
from src.jiif.model import JIIFModel, build_model
from utils.ml_logging import get_logger

logger = get_logger()

FORMAT_NAME = "jiif-checkpoint"
FORMAT_VERSION = 1
HEADER_ENTRY = "header.yaml"
LATEST_POINTER = "latest"
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


@dataclass
class Checkpoint:
    model_state: "OrderedDict[str, torch.Tensor]"
    epoch: int
    step: int
    seed: int
    config: Dict[str, Any]
    optimizer_state: Optional[Dict[str, Any]] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def run_config(self) -> RunConfig:
        return RunConfig.model_validate(self.config)


def _npy_bytes(tensor: torch.Tensor) -> bytes:
    array = tensor.detach().cpu().contiguous().numpy()
    array = array.astype(array.dtype.newbyteorder("<"), copy=False)
    buffer = io.BytesIO()
    np.lib.format.write_array(buffer, array, allow_pickle=False)
    return buffer.getvalue()


def _read_npy(data: bytes) -> torch.Tensor:
    array = np.lib.format.read_array(io.BytesIO(data), allow_pickle=False)
    return torch.from_numpy(array.astype(array.dtype.newbyteorder("="), copy=True))


def _yaml_safe(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _yaml_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_yaml_safe(v) for v in value]
    if isinstance(value, torch.Tensor):
        return value.item() if value.numel() == 1 else value.tolist()
    return value


def _split_optimizer_state(
    optimizer_state: Dict[str, Any]
) -> Tuple[Dict[str, Any], Dict[str, bytes]]:
    groups = _yaml_safe(optimizer_state.get("param_groups", []))
    scalars: Dict[str, Dict[str, Any]] = {}
    arrays: Dict[str, bytes] = {}
    for index, state in sorted(optimizer_state.get("state", {}).items()):
        entry: Dict[str, Any] = {}
        for key, value in state.items():
            if isinstance(value, torch.Tensor):
                arrays[f"optimizer/{index}/{key}.npy"] = _npy_bytes(value)
                entry[key] = "tensor"
            else:
                entry[key] = _yaml_safe(value)
        scalars[str(index)] = entry
    return {"param_groups": groups, "state": scalars}, arrays


def save_checkpoint(checkpoint: Checkpoint, path: Union[str, Path]) -> Path:
    """Write ``checkpoint`` atomically to ``path``."""
    path = Path(path)
    entries: Dict[str, bytes] = {}
    for name, tensor in checkpoint.model_state.items():
        entries[f"params/{name}.npy"] = _npy_bytes(tensor)

    optimizer_header = None
    if checkpoint.optimizer_state is not None:
        optimizer_header, optimizer_arrays = _split_optimizer_state(checkpoint.optimizer_state)
        entries.update(optimizer_arrays)

    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "epoch": int(checkpoint.epoch),
        "step": int(checkpoint.step),
        "seed": int(checkpoint.seed),
        "parameters": list(checkpoint.model_state.keys()),
        "optimizer": optimizer_header,
        "extra": _yaml_safe(checkpoint.extra),
        "config": _yaml_safe(checkpoint.config),
    }
    entries[HEADER_ENTRY] = yaml.safe_dump(header, sort_keys=False).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(path.name + ".tmp")
    try:
        with zipfile.ZipFile(tmp_path, "w") as archive:
            for name in sorted(entries):
                info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
                info.compress_type = zipfile.ZIP_DEFLATED
                info.create_system = 3
                info.external_attr = 0o644 << 16
                archive.writestr(info, entries[name])
        os.replace(tmp_path, path)
    except OSError as e:
        logger.error(f"checkpoint=write_failed path={path} error={e}")
        raise CheckpointError(f"cannot write checkpoint {path}: {e}") from e
    logger.info(f"checkpoint=saved path={path} epoch={checkpoint.epoch} step={checkpoint.step}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Read a checkpoint archive, or the one a run directory's ``latest`` pointer names.

    :raises CheckpointError: When the file is missing or malformed.
    """
    path = resolve_checkpoint(path)
    try:
        with zipfile.ZipFile(path, "r") as archive:
            header = yaml.safe_load(archive.read(HEADER_ENTRY).decode("utf-8"))
            if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
                raise CheckpointError(f"{path} is not a {FORMAT_NAME} archive")
            model_state = OrderedDict(
                (name, _read_npy(archive.read(f"params/{name}.npy"))) for name in header["parameters"]
            )
            optimizer_state = None
            if header.get("optimizer") is not None:
                optimizer_state = _restore_optimizer_state(archive, header["optimizer"])
    except (zipfile.BadZipFile, KeyError, OSError, yaml.YAMLError) as e:
        logger.error(f"checkpoint=read_failed path={path} error={e}")
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e

    return Checkpoint(
        model_state=model_state,
        epoch=int(header["epoch"]),
        step=int(header["step"]),
        seed=int(header["seed"]),
        config=header["config"],
        optimizer_state=optimizer_state,
        extra=header.get("extra") or {},
    )


def _restore_optimizer_state(archive: zipfile.ZipFile, header: Dict[str, Any]) -> Dict[str, Any]:
    groups = []
    for group in header.get("param_groups", []):
        group = dict(group)
        if "betas" in group:
            group["betas"] = tuple(group["betas"])
        groups.append(group)
    state: Dict[int, Dict[str, Any]] = {}
    for index, entry in header.get("state", {}).items():
        restored = {}
        for key, value in entry.items():
            if value == "tensor":
                restored[key] = _read_npy(archive.read(f"optimizer/{index}/{key}.npy"))
            else:
                restored[key] = value
        state[int(index)] = restored
    return {"state": state, "param_groups": groups}


def resolve_checkpoint(path: Union[str, Path]) -> Path:
    path = Path(path)
    if path.is_dir():
        pointer = path / LATEST_POINTER
        if not pointer.is_file():
            raise CheckpointError(f"run directory {path} has no '{LATEST_POINTER}' pointer")
        path = path / pointer.read_text(encoding="utf-8").strip()
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    return path


def write_latest_pointer(run_dir: Union[str, Path], checkpoint_path: Union[str, Path]) -> Path:
    pointer = Path(run_dir) / LATEST_POINTER
    pointer.write_text(Path(checkpoint_path).name + "\n", encoding="utf-8")
    return pointer


def model_state_of(model: JIIFModel) -> "OrderedDict[str, torch.Tensor]":
    return OrderedDict((name, tensor.detach().clone()) for name, tensor in model.state_dict().items())


def restore_model(checkpoint: Checkpoint) -> JIIFModel:
    """Rebuild the network described by the checkpoint's config and load its weights."""
    config = checkpoint.run_config
    model = build_model(config.model, config.seed)
    try:
        model.load_state_dict(checkpoint.model_state)
    except RuntimeError as e:
        raise CheckpointError(f"checkpoint parameters do not match the configured model: {e}") from e
    model.eval()
    return model
