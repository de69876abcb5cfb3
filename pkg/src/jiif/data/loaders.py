"""
On-disk dataset layout.

    <root>/<dataset>/<split>/<id>_rgb.png     8-bit RGB guide
    <root>/<dataset>/<split>/<id>_depth.png   16-bit depth, stored = value / scale_factor
    <root>/<dataset>/<split>/meta.json        value_kind and scale_factor per id

``convert_release`` ingests public releases exported as ``<id>_rgb.png`` plus
``<id>_depth.npy`` (metres for NYU v2, raw disparity otherwise).
"""

from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Union

import numpy as np
import torch
from PIL import Image
from pydantic import BaseModel, Field, ValidationError

from src.jiif import settings
from src.jiif.data.pairs import RGBDPair
from src.jiif.data.synthetic import generate_synthetic
from src.jiif.exceptions import DataError, InvalidArgumentError
from utils.ml_logging import get_logger

logger = get_logger()

SPLITS = ("train", "test")
META_FILE = "meta.json"
UINT16_MAX = np.iinfo(np.uint16).max

# stored 16-bit units
NYU_SCALE_FACTOR = 0.1  # millimetres -> centimetres
DISPARITY_SCALE_FACTOR = 1.0 / 64.0


class PairMeta(BaseModel):
    value_kind: Literal["depth", "disparity"]
    scale_factor: float = Field(gt=0.0)


class SplitMeta(BaseModel):
    dataset: str
    split: str
    items: Dict[str, PairMeta]


def _split_dir(root: Union[str, Path], dataset: str, split: str) -> Path:
    return Path(root) / dataset / split


def read_split_meta(directory: Path) -> SplitMeta:
    meta_path = directory / META_FILE
    if not meta_path.is_file():
        raise DataError(f"missing dataset metadata: {meta_path}")
    try:
        return SplitMeta.model_validate_json(meta_path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise DataError(f"invalid dataset metadata {meta_path}: {e}") from e


def read_guide(path: Path) -> torch.Tensor:
    if not path.is_file():
        raise DataError(f"missing guide image: {path}")
    with Image.open(path) as img:
        rgb = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return torch.from_numpy(rgb.transpose(2, 0, 1).copy())


def read_depth(path: Path, scale_factor: float) -> torch.Tensor:
    if not path.is_file():
        raise DataError(f"missing depth image: {path}")
    with Image.open(path) as img:
        if img.mode not in ("I;16", "I;16B", "I;16L", "I"):
            raise DataError(f"depth image {path} must be 16-bit single channel, got mode {img.mode}")
        stored = np.asarray(img).astype(np.float64)
    return torch.from_numpy((stored * scale_factor)[None].astype(np.float32))


def write_pair(pair: RGBDPair, directory: Path, pair_id: str) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    rgb = (pair.guide.clamp(0, 1).numpy().transpose(1, 2, 0) * 255.0).round().astype(np.uint8)
    Image.fromarray(rgb).save(directory / f"{pair_id}_rgb.png")

    stored = np.round(pair.depth[0].to(torch.float64).numpy() / pair.scale_factor)
    if stored.max(initial=0) > UINT16_MAX:
        raise DataError(
            f"pair '{pair_id}' exceeds the 16-bit range at scale_factor {pair.scale_factor}"
        )
    Image.fromarray(stored.astype(np.uint16)).save(directory / f"{pair_id}_depth.png")


def write_split(
    pairs: Sequence[RGBDPair], root: Union[str, Path], dataset: str, split: str, ids: Optional[Sequence[str]] = None
) -> Path:
    """Write pairs and their ``meta.json`` into the documented layout."""
    directory = _split_dir(root, dataset, split)
    ids = list(ids) if ids is not None else [pair.name or f"{i:04d}" for i, pair in enumerate(pairs)]
    items = {}
    for pair_id, pair in zip(ids, pairs):
        write_pair(pair, directory, pair_id)
        items[pair_id] = PairMeta(value_kind=pair.value_kind, scale_factor=pair.scale_factor)
    meta = SplitMeta(dataset=dataset, split=split, items=items)
    (directory / META_FILE).write_text(meta.model_dump_json(indent=2), encoding="utf-8")
    logger.info(f"dataset=written name={dataset} split={split} pairs={len(items)} dir={directory}")
    return directory


def load_dataset(
    name: str,
    split: str,
    root: Optional[Union[str, Path]] = None,
    seed: int = 0,
    count: Optional[int] = None,
    size: int = 128,
) -> List[RGBDPair]:
    """
    Load one split of a dataset in deterministic (sorted id) order.

    :param name: ``nyu_v2`` | ``middlebury`` | ``middlebury_noisy`` | ``lu`` | ``synthetic``.
    :param split: ``train`` | ``test``.
    :param root: Dataset root; defaults to ``JIIF_DATA_ROOT``.
    :param seed: Root seed for the synthetic generator.
    :param count: Keep only the first ``count`` pairs (synthetic: how many to generate).
    :param size: Synthetic image side length.
    :raises DataError: When files are missing, naming the offending path.
    """
    if name not in settings.DATASET_NAMES:
        raise InvalidArgumentError(f"unknown dataset '{name}', expected one of {settings.DATASET_NAMES}")
    if split not in SPLITS:
        raise InvalidArgumentError(f"unknown split '{split}', expected one of {SPLITS}")
    if split == "train" and name in settings.TEST_ONLY_DATASETS:
        raise DataError(f"dataset '{name}' is test-only")

    directory = _split_dir(root or settings.DATA_ROOT, name, split)
    if name == settings.SYNTHETIC and not (directory / META_FILE).is_file():
        pairs = generate_synthetic(count or 8, seed, size=size, split=split)
        logger.info(f"dataset=generated name={name} split={split} pairs={len(pairs)} seed={seed}")
        return pairs
    if not directory.is_dir():
        raise DataError(f"dataset directory not found: {directory}")

    meta = read_split_meta(directory)
    pairs = []
    for pair_id in sorted(meta.items):
        item = meta.items[pair_id]
        pairs.append(
            RGBDPair(
                guide=read_guide(directory / f"{pair_id}_rgb.png"),
                depth=read_depth(directory / f"{pair_id}_depth.png", item.scale_factor),
                value_kind=item.value_kind,
                name=pair_id,
                scale_factor=item.scale_factor,
            )
        )
        if count is not None and len(pairs) >= count:
            break

    expected = settings.DATASET_SIZES.get((name, split))
    if count is None and expected is not None and len(pairs) != expected:
        logger.warning(f"dataset=size_mismatch name={name} split={split} pairs={len(pairs)} expected={expected}")
    logger.info(f"dataset=loaded name={name} split={split} pairs={len(pairs)} dir={directory}")
    return pairs


def convert_release(
    source: Union[str, Path], dataset: str, root: Optional[Union[str, Path]] = None
) -> Dict[str, int]:
    """
    Ingest ``<id>_rgb.png`` + ``<id>_depth.npy`` pairs into the dataset layout.

    NYU v2 depth is given in metres and split first-1000 train / rest test;
    disparity datasets are test-only.

    :return: Pair count per written split.
    """
    if dataset not in settings.DATASET_NAMES or dataset == settings.SYNTHETIC:
        raise InvalidArgumentError(f"cannot convert into dataset '{dataset}'")
    source = Path(source)
    if not source.is_dir():
        raise DataError(f"source directory not found: {source}")

    ids = sorted(path.name[: -len("_rgb.png")] for path in source.glob("*_rgb.png"))
    if not ids:
        raise DataError(f"no '<id>_rgb.png' files in {source}")

    disparity = dataset in settings.DISPARITY_DATASETS
    pairs = []
    for pair_id in ids:
        depth_path = source / f"{pair_id}_depth.npy"
        if not depth_path.is_file():
            raise DataError(f"missing depth array: {depth_path}")
        try:
            values = np.load(depth_path).astype(np.float64)
        except (OSError, ValueError) as e:
            raise DataError(f"unreadable depth array {depth_path}: {e}") from e
        values = np.squeeze(values)
        if not disparity:
            values = values * 100.0
        pairs.append(
            RGBDPair(
                guide=read_guide(source / f"{pair_id}_rgb.png"),
                depth=torch.from_numpy(values[None].astype(np.float32)),
                value_kind="disparity" if disparity else "depth",
                name=pair_id,
                scale_factor=DISPARITY_SCALE_FACTOR if disparity else NYU_SCALE_FACTOR,
            )
        )

    root = root or settings.DATA_ROOT
    if dataset == settings.NYU_V2:
        cut = settings.NYU_TRAIN_COUNT
        splits = {"train": (pairs[:cut], ids[:cut]), "test": (pairs[cut:], ids[cut:])}
    else:
        splits = {"test": (pairs, ids)}

    counts = {}
    for split, (split_pairs, split_ids) in splits.items():
        if split_pairs:
            write_split(split_pairs, root, dataset, split, ids=split_ids)
        counts[split] = len(split_pairs)
    logger.info(f"convert=done dataset={dataset} source={source} counts={counts}")
    return counts


def write_synthetic_dataset(
    root: Optional[Union[str, Path]], count: int, seed: int, size: int = 128, test_count: Optional[int] = None
) -> Dict[str, Path]:
    """Materialize seeded synthetic train/test splits on disk."""
    root = root or settings.DATA_ROOT
    return {
        split: write_split(
            generate_synthetic(n, seed, size=size, split=split), root, settings.SYNTHETIC, split
        )
        for split, n in (("train", count), ("test", test_count or count))
    }
