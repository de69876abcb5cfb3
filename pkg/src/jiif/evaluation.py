"""
Average-RMSE benchmarking of trained models and the bicubic baseline, error-map
dumps and the ablation harness.

Depth datasets are scored in centimeters; disparity datasets in their raw
disparity units.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from PIL import Image
from pydantic import BaseModel, Field

from src.jiif import settings
from src.jiif.config import DegradationSpec, RunConfig
from src.jiif.data import RGBDPair, degrade, denormalize, normalize_with
from src.jiif.data.pairs import depth_stats
from src.jiif.exceptions import InvalidArgumentError
from src.jiif.interpolation import bicubic_resample
from src.jiif.model import JIIFModel
from src.jiif.reporting.plots import colorize
from src.jiif.seeding import derive_seed
from src.jiif.training import Trainer
from utils.ml_logging import get_logger, log_function_call

logger = get_logger()

REPORT_RECORDS = "report.txt"
REPORT_JSON = "report.json"
REPORT_TABLE = "table.txt"


def rmse(pred: Union[torch.Tensor, np.ndarray], gt: Union[torch.Tensor, np.ndarray], crop_border: int = 0) -> float:
    """
    Root-mean-square error over all pixels.

    :param crop_border: Pixels dropped from every side before scoring.
    :raises InvalidArgumentError: On a size mismatch or a crop that leaves nothing.
    """
    pred = np.asarray(pred.detach().cpu() if isinstance(pred, torch.Tensor) else pred, dtype=np.float64)
    gt = np.asarray(gt.detach().cpu() if isinstance(gt, torch.Tensor) else gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise InvalidArgumentError(f"prediction {pred.shape} and ground truth {gt.shape} differ in size")
    if crop_border:
        if min(pred.shape[-2:]) <= 2 * crop_border:
            raise InvalidArgumentError(f"crop_border {crop_border} removes the whole {pred.shape[-2:]} image")
        pred = pred[..., crop_border:-crop_border, crop_border:-crop_border]
        gt = gt[..., crop_border:-crop_border, crop_border:-crop_border]
    return float(np.sqrt(np.mean((pred - gt) ** 2)))


class BicubicPredictor:
    """
    Closed-form baseline. It runs in normalized space like the model so that a
    residual model with a zero decoder scores identically.
    """

    label = "Bicubic"
    normalized = True

    def predict(self, lr_depth: torch.Tensor, guide: torch.Tensor) -> torch.Tensor:
        return bicubic_resample(lr_depth, guide.shape[-2], guide.shape[-1])


class ModelPredictor:
    label = "JIIF"
    normalized = True

    def __init__(self, model: JIIFModel, label: Optional[str] = None, chunk_size: Optional[int] = None):
        self.model = model
        self.chunk_size = chunk_size
        if label:
            self.label = label

    def predict(self, lr_depth: torch.Tensor, guide: torch.Tensor) -> torch.Tensor:
        self.model.eval()
        dtype = next(self.model.parameters()).dtype
        out = self.model.full_inference(lr_depth.to(dtype), guide.to(dtype), chunk_size=self.chunk_size)
        return out.to(lr_depth.dtype)


class ImageScore(BaseModel):
    name: str
    rmse: float
    reference: Optional[float] = None


class BenchmarkEntry(BaseModel):
    dataset: str
    scale: int
    unit: str
    average_rmse: float
    reference: Optional[float] = None
    images: List[ImageScore] = Field(default_factory=list)


class BenchmarkReport(BaseModel):
    """Per-dataset, per-scale average RMSE plus the per-image scores behind each average."""

    method: str
    strategy: Optional[str] = None
    noise_sigma: float = 0.0
    noise_domain: str = "depth"
    crop_border: int = 0
    entries: List[BenchmarkEntry] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict)

    def entry(self, dataset: str, scale: int) -> BenchmarkEntry:
        for entry in self.entries:
            if entry.dataset == dataset and entry.scale == scale:
                return entry
        raise KeyError(f"no entry for dataset={dataset} scale={scale}")

    def average(self, dataset: str, scale: int) -> float:
        return self.entry(dataset, scale).average_rmse

    def to_records(self) -> List[str]:
        """Line-oriented key=value records: one summary line per entry, one per image."""
        lines = []
        common = f"method={self.method} noise_sigma={self.noise_sigma:g} noise_domain={self.noise_domain}"
        for entry in self.entries:
            ref = f" reference={entry.reference:.2f}" if entry.reference is not None else ""
            lines.append(
                f"{common} dataset={entry.dataset} scale={entry.scale} unit={entry.unit} "
                f"images={len(entry.images)} average_rmse={entry.average_rmse:.6f}{ref}"
            )
            for image in entry.images:
                lines.append(
                    f"{common} dataset={entry.dataset} scale={entry.scale} image={image.name} "
                    f"rmse={image.rmse:.6f}"
                )
        return lines


def _reference_for(method: str, dataset: str, scale: int, noisy: bool) -> Optional[float]:
    table = settings.REFERENCE_BICUBIC if method == BicubicPredictor.label else settings.REFERENCE_JIIF
    if noisy:
        return None
    return table.get(dataset, {}).get(scale)


def _scene_reference(method: str, scene: str, scale: int) -> Optional[float]:
    table = (
        settings.REFERENCE_NOISY_BICUBIC if method == BicubicPredictor.label else settings.REFERENCE_NOISY_JIIF
    )
    return table.get(scene, {}).get(scale)


def evaluate_pair(
    predictor,
    pair: RGBDPair,
    spec: DegradationSpec,
    seed: int,
    crop_border: int = 0,
) -> Tuple[float, torch.Tensor, RGBDPair]:
    """
    Degrade, predict, denormalize and score one pair.

    :return: ``(rmse, prediction in physical units, scored HR pair)``.
    """
    degraded = degrade(pair, spec, seed)
    hr_pair = degraded.hr_pair
    if predictor.normalized:
        stats = depth_stats(hr_pair.depth)
        pred_norm = predictor.predict(normalize_with(degraded.lr_depth, stats), hr_pair.guide)
        prediction = denormalize(pred_norm, stats)
    else:
        prediction = predictor.predict(degraded.lr_depth, hr_pair.guide)
    return rmse(prediction, hr_pair.depth, crop_border), prediction, hr_pair


@log_function_call()
def run_benchmark(
    predictor,
    datasets: Mapping[str, Sequence[RGBDPair]],
    scales: Sequence[int],
    noise: Optional[DegradationSpec] = None,
    seed: int = 0,
    crop_border: int = 0,
    maps_dir: Optional[Path] = None,
    config: Optional[RunConfig] = None,
) -> BenchmarkReport:
    """
    Score a predictor on every (dataset, scale) combination.

    :param predictor: ``BicubicPredictor`` or ``ModelPredictor``.
    :param datasets: Test pairs per dataset name.
    :param noise: Noise parameters; its ``scale`` is replaced by each entry of ``scales``.
    :param maps_dir: When given, prediction and error-map PNGs are written below it.
    """
    noise = noise or DegradationSpec()
    noisy = noise.noise_sigma > 0
    model = getattr(predictor, "model", None)
    report = BenchmarkReport(
        method=predictor.label,
        strategy=model.weight_strategy.value if model is not None else None,
        noise_sigma=noise.noise_sigma,
        noise_domain=noise.noise_domain.value,
        crop_border=crop_border,
        config=config.model_dump(mode="json") if config is not None else {},
    )
    for dataset, pairs in datasets.items():
        if not pairs:
            raise InvalidArgumentError(f"dataset '{dataset}' has no test pairs")
        unit = "disparity" if pairs[0].value_kind == "disparity" else "cm"
        for scale in scales:
            spec = noise.model_copy(update={"scale": int(scale)})
            images = []
            for index, pair in enumerate(pairs):
                score, prediction, hr_pair = evaluate_pair(
                    predictor, pair, spec, derive_seed(seed, "eval", dataset, scale, index), crop_border
                )
                reference = _scene_reference(predictor.label, pair.name, scale) if noisy else None
                images.append(ImageScore(name=pair.name or f"{index:04d}", rmse=score, reference=reference))
                if maps_dir is not None:
                    stem = Path(maps_dir) / dataset / f"x{scale}" / (pair.name or f"{index:04d}")
                    save_error_map(prediction, hr_pair.depth, stem, scale_factor=pair.scale_factor)
            average = float(np.mean([image.rmse for image in images]))
            report.entries.append(
                BenchmarkEntry(
                    dataset=dataset,
                    scale=int(scale),
                    unit=unit,
                    average_rmse=average,
                    reference=_reference_for(predictor.label, dataset, int(scale), noisy),
                    images=images,
                )
            )
            logger.keyinfo(
                f"benchmark method={predictor.label} dataset={dataset} scale={scale} "
                f"images={len(images)} average_rmse={average:.4f} unit={unit}"
            )
    return report


def write_report(report: BenchmarkReport, out_dir: Path, table: Optional[str] = None) -> Dict[str, Path]:
    """Write the key=value records, the JSON dump and (optionally) a rendered table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "records": out_dir / REPORT_RECORDS,
        "json": out_dir / REPORT_JSON,
    }
    paths["records"].write_text("\n".join(report.to_records()) + "\n", encoding="utf-8")
    paths["json"].write_text(report.model_dump_json(indent=2), encoding="utf-8")
    if table is not None:
        paths["table"] = out_dir / REPORT_TABLE
        paths["table"].write_text(table, encoding="utf-8")
    logger.keyinfo(f"report=written dir={out_dir}")
    return paths


def save_error_map(
    pred: torch.Tensor,
    gt: torch.Tensor,
    path: Union[str, Path],
    scale_factor: float = 0.1,
    vmax: Optional[float] = None,
) -> Tuple[Path, Path]:
    """
    Write ``<path>_error.png`` (false-color absolute error) and ``<path>_pred.png``
    (prediction as 16-bit, stored = value / scale_factor).
    """
    pred_np = np.asarray(pred.detach().cpu(), dtype=np.float64).squeeze()
    gt_np = np.asarray(gt.detach().cpu(), dtype=np.float64).squeeze()
    if pred_np.shape != gt_np.shape:
        raise InvalidArgumentError(f"prediction {pred_np.shape} and ground truth {gt_np.shape} differ in size")
    path = Path(path)
    error_path = path.with_name(path.name + "_error.png")
    pred_path = path.with_name(path.name + "_pred.png")
    stored = np.clip(np.round(pred_np / scale_factor), 0, np.iinfo(np.uint16).max).astype(np.uint16)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(colorize(np.abs(pred_np - gt_np), vmax=vmax)).save(error_path)
        Image.fromarray(stored).save(pred_path)
    except OSError as e:
        logger.error(f"error_map=write_failed path={path} error={e}")
        raise
    return error_path, pred_path


class AblationRow(BaseModel):
    table: str
    label: str
    mode: str
    strategy: str
    use_residual: bool
    rmse: float
    reference: Optional[float] = None
    full_method: bool = False


class AblationReport(BaseModel):
    scale: int
    dataset: str
    rows: List[AblationRow] = Field(default_factory=list)

    def table(self, name: str) -> List[AblationRow]:
        return [row for row in self.rows if row.table == name]


def ablation_variants() -> List[Dict[str, Any]]:
    """The module rows followed by the weight-strategy rows, in table order."""
    variants = []
    for label, joint, residual, reference in settings.ABLATION_MODULE_ROWS:
        variants.append(
            {
                "table": "modules",
                "label": label,
                "mode": "joint" if joint else "separate",
                "strategy": "graph_attention",
                "use_residual": residual,
                "reference": reference,
                "full_method": joint and residual,
            }
        )
    for label, strategy, reference in settings.ABLATION_WEIGHT_ROWS:
        graph = strategy == "graph_attention"
        variants.append(
            {
                "table": "weights",
                "label": label,
                "mode": "joint" if graph else "value_only",
                "strategy": strategy,
                "use_residual": True,
                "reference": reference,
                "full_method": graph,
            }
        )
    return variants


@log_function_call()
def run_ablation(
    config: RunConfig,
    train_pairs: Sequence[RGBDPair],
    test_pairs: Sequence[RGBDPair],
    run_dir: Optional[Path] = None,
) -> AblationReport:
    """
    Train and score every ablation variant at the ablation scale.

    Variants differ from ``config`` only in decoder mode, weight strategy and the
    residual flag. A configuration shared by two rows is trained once.
    """
    scale = settings.ABLATION_SCALE
    report = AblationReport(scale=scale, dataset=config.data.dataset)
    results: Dict[Tuple[str, str, bool], float] = {}
    base = config.model_dump(mode="json")

    for variant in ablation_variants():
        key = (variant["mode"], variant["strategy"], variant["use_residual"])
        if key not in results:
            slug = f"{variant['mode']}_{variant['strategy']}_{'res' if variant['use_residual'] else 'nores'}"
            raw = {
                **base,
                "run_name": f"{config.run_name}_{slug}",
                "model": {
                    **base["model"],
                    "mode": variant["mode"],
                    "weight_strategy": variant["strategy"],
                    "use_residual": variant["use_residual"],
                },
                "degradation": {**base["degradation"], "scale": scale},
            }
            variant_config = RunConfig.model_validate(raw)
            logger.keyinfo(f"ablation=variant label=\"{variant['label']}\" config={slug}")
            trainer = Trainer(variant_config, train_pairs, run_dir=(run_dir / slug) if run_dir else None)
            trainer.fit()
            bench = run_benchmark(
                ModelPredictor(trainer.model),
                {config.data.dataset: test_pairs},
                [scale],
                noise=variant_config.degradation,
                seed=config.seed,
            )
            results[key] = bench.average(config.data.dataset, scale)
        else:
            logger.info(f"ablation=reuse label=\"{variant['label']}\" mode={key[0]} strategy={key[1]}")

        report.rows.append(
            AblationRow(
                table=variant["table"],
                label=variant["label"],
                mode=variant["mode"],
                strategy=variant["strategy"],
                use_residual=variant["use_residual"],
                rmse=results[key],
                reference=variant["reference"],
                full_method=variant["full_method"],
            )
        )
    return report
