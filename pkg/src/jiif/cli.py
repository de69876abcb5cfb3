"""
Command-line entry point.

    python -m src.jiif <command> [flags]

Commands: prepare-data (synth | convert), train, eval, ablate, infer, demo.
Settings resolve as built-in defaults < ``--config`` YAML < flags. Exit codes:
0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import torch
import yaml

from src.jiif import settings
from src.jiif.checkpoint import load_checkpoint, restore_model
from src.jiif.config import (
    DecoderMode,
    NoiseDomain,
    RunConfig,
    WeightStrategy,
    load_run_config,
    save_resolved_config,
)
from src.jiif.data import (
    RGBDPair,
    convert_release,
    degrade,
    denormalize,
    load_dataset,
    normalize_with,
    write_synthetic_dataset,
)
from src.jiif.data.loaders import read_depth, read_guide
from src.jiif.data.pairs import depth_stats
from src.jiif.evaluation import (
    BicubicPredictor,
    ModelPredictor,
    evaluate_pair,
    rmse,
    run_ablation,
    run_benchmark,
    save_error_map,
    write_report,
)
from src.jiif.exceptions import EXIT_OK, ConfigError, DataError, JIIFError
from src.jiif.interpolation import bicubic_resample
from src.jiif.reporting import ReportRenderer
from src.jiif.reporting.plots import plot_weight_inspection
from src.jiif.seeding import configure_determinism, derive_seed
from src.jiif.training import train
from utils.ml_logging import detach_file_handlers, get_logger
from utils.run_summary import print_run_summary

logger = get_logger()

CONFIG_DIR = Path(__file__).resolve().parent / "configs"
RESOLVED_CONFIG = "resolved_config.yaml"
RUN_LOG = "run.log"


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from e


def _str_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _pixel(text: str) -> List[int]:
    values = _int_list(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"expected ROW,COL, got '{text}'")
    return values


def resolve_config_path(value: Optional[str]) -> Optional[Path]:
    """Accept a YAML path or the name of a bundled config (``synthetic_desk``)."""
    if value is None:
        return None
    path = Path(value)
    if path.is_file():
        return path
    bundled = CONFIG_DIR / (value if value.endswith(".yaml") else f"{value}.yaml")
    if bundled.is_file():
        return bundled
    raise ConfigError(f"Config file not found: {value} (bundled: {sorted(p.stem for p in CONFIG_DIR.glob('*.yaml'))})")


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {key: value for key, value in vars(args).items() if "." in key}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML run config, or a bundled config name (e.g. synthetic_desk)")
    parser.add_argument("--run-name", dest="run_name", help="run directory name under --output-dir (default: jiif)")
    parser.add_argument("--output-dir", dest="output_dir", help=f"runs root (default: $JIIF_RUNS_DIR or {settings.RUNS_DIR})")
    parser.add_argument("--seed", dest="seed", type=int, help="root seed every random stream derives from (default: 0)")
    parser.add_argument("--data-root", dest="data.root", help=f"dataset root (default: $JIIF_DATA_ROOT or {settings.DATA_ROOT})")
    parser.add_argument("--log-level", dest="log_level", help="DEBUG | INFO | KEYINFO | WARNING (default: $JIIF_LOG_LEVEL or INFO)")
    parser.add_argument("--debug", action="store_true", help="enable contract checks (weight normalization)")


def _add_degradation(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scale", dest="degradation.scale", type=int, help="up-sampling factor (benchmarks: 4, 8, 16; default: 8)")
    parser.add_argument(
        "--noise-sigma",
        dest="degradation.noise_sigma",
        type=float,
        help=f"conditional noise sigma (default: 0; benchmarks: {settings.NOISE_SIGMA_NYU} NYU, {settings.NOISE_SIGMA_MIDDLEBURY:g} Middlebury)",
    )
    parser.add_argument(
        "--noise-domain",
        dest="degradation.noise_domain",
        choices=[d.value for d in NoiseDomain],
        help="noise proxy x: normalized depth, or 1/d for disparity (default: depth)",
    )


def _add_model_and_train(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", dest="data.dataset", choices=settings.DATASET_NAMES, help="training dataset (default: synthetic)")
    parser.add_argument("--epochs", dest="train.epochs", type=int, help="epochs (default: 200)")
    parser.add_argument("--batch-size", dest="train.batch_size", type=int, help="batch size (default: 1)")
    parser.add_argument("--lr", dest="train.lr", type=float, help="initial learning rate (default: 1e-4)")
    parser.add_argument("--lr-decay-factor", dest="train.lr_decay_factor", type=float, help="step decay factor (default: 0.2)")
    parser.add_argument("--lr-decay-epochs", dest="train.lr_decay_epochs", type=int, help="epochs per decay step (default: 60)")
    parser.add_argument("--max-steps", dest="train.max_steps", type=int, help="stop after this many optimizer steps")
    parser.add_argument("--checkpoint-every", dest="train.checkpoint_every", type=int, help="epochs between checkpoints (default: 10)")
    parser.add_argument("--patch-size", dest="data.patch_size", type=int, help=f"HR crop side (default: {settings.PATCH_SIZE})")
    parser.add_argument(
        "--samples-per-patch", dest="data.samples_per_patch", type=int, help=f"queries per patch (default: {settings.SAMPLES_PER_PATCH})"
    )
    parser.add_argument("--synthetic-count", dest="data.synthetic_count", type=int, help="generated pairs per split (default: 8)")
    parser.add_argument("--synthetic-size", dest="data.synthetic_size", type=int, help="generated image side (default: 128)")
    parser.add_argument("--feature-dim", dest="model.feature_dim", type=int, help=f"encoder output dim (default: {settings.FEATURE_DIM})")
    parser.add_argument("--num-resblocks", dest="model.num_residual_blocks", type=int, help="residual blocks per encoder (default: 16)")
    parser.add_argument(
        "--strategy", dest="model.weight_strategy", choices=[s.value for s in WeightStrategy],
        help="interpolation weights (default: graph_attention)",
    )
    parser.add_argument(
        "--mode", dest="model.mode", choices=[m.value for m in DecoderMode],
        help="decoder layout (default: joint)",
    )
    residual = parser.add_mutually_exclusive_group()
    residual.add_argument("--residual", dest="model.use_residual", action="store_const", const=True, help="predict a residual over bicubic (default)")
    residual.add_argument("--no-residual", dest="model.use_residual", action="store_const", const=False, help="predict depth directly")


def _add_eval(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--checkpoint", dest="eval.checkpoint", help="checkpoint file or run directory (uses its 'latest' pointer)")
    parser.add_argument("--baseline", dest="eval.baseline", choices=["bicubic"], help="score the closed-form baseline instead of a checkpoint")
    parser.add_argument("--dataset", dest="eval.datasets", type=_str_list, help="comma-separated test datasets (default: synthetic)")
    parser.add_argument("--scales", dest="eval.scales", type=_int_list, help="comma-separated scales (default: 4,8,16)")
    parser.add_argument("--crop-border", dest="eval.crop_border", type=int, help="pixels dropped per side before RMSE (default: 0)")
    parser.add_argument("--save-maps", dest="eval.save_maps", action="store_const", const=True, help="dump predictions and error maps")
    parser.add_argument("--limit", type=int, help="score only the first N pairs of each dataset")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jiif", description="Joint implicit image function for RGB-guided depth super-resolution."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    prepare = commands.add_parser("prepare-data", help="generate or convert datasets")
    prepare_kinds = prepare.add_subparsers(dest="kind", required=True)
    synth = prepare_kinds.add_parser("synth", help="write seeded synthetic train/test splits")
    _add_common(synth)
    synth.add_argument("--count", type=int, default=8, help="train pairs (default: 8)")
    synth.add_argument("--test-count", type=int, help="test pairs (default: --count)")
    synth.add_argument("--size", type=int, default=128, help="image side (default: 128)")
    convert = prepare_kinds.add_parser("convert", help="ingest <id>_rgb.png + <id>_depth.npy exports")
    _add_common(convert)
    convert.add_argument("--source", required=True, help="directory of exported pairs")
    convert.add_argument("--dataset", required=True, choices=[n for n in settings.DATASET_NAMES if n != settings.SYNTHETIC])

    train_cmd = commands.add_parser("train", help="train a model")
    _add_common(train_cmd)
    _add_degradation(train_cmd)
    _add_model_and_train(train_cmd)

    eval_cmd = commands.add_parser("eval", help="average-RMSE benchmark")
    _add_common(eval_cmd)
    _add_degradation(eval_cmd)
    _add_eval(eval_cmd)

    ablate = commands.add_parser("ablate", help="train and score the module and weight-strategy ablations at x8")
    _add_common(ablate)
    _add_degradation(ablate)
    _add_model_and_train(ablate)

    infer = commands.add_parser("infer", help="run a checkpoint on one pair")
    _add_common(infer)
    _add_degradation(infer)
    infer.add_argument("--checkpoint", required=True, help="checkpoint file or run directory")
    infer.add_argument("--rgb", help="guide image (8-bit PNG)")
    infer.add_argument("--depth", help="HR depth: .npy in physical units, or 16-bit PNG")
    infer.add_argument("--depth-scale-factor", type=float, default=0.1, help="units per stored PNG value (default: 0.1)")
    infer.add_argument("--dataset", help="take the pair from this dataset's test split instead")
    infer.add_argument("--index", type=int, default=0, help="pair index within --dataset (default: 0)")
    infer.add_argument("--dump-weights", type=_pixel, metavar="ROW,COL", help="write the learned corner weights of one HR pixel")
    infer.add_argument("--out", help="output directory (default: <run_dir>/infer)")

    demo = commands.add_parser("demo", help="synthetic end-to-end run: train, benchmark against bicubic, dump maps")
    _add_common(demo)
    _add_degradation(demo)
    demo.add_argument("--steps", dest="train.max_steps", type=int, help="optimizer steps (default: 200)")
    return parser


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _prepare_run(args: argparse.Namespace, default_config: Optional[str] = None, extra: Optional[Dict[str, Any]] = None) -> RunConfig:
    overrides = {**_overrides(args), **(extra or {})}
    for key in ("run_name", "output_dir", "seed"):
        if getattr(args, key, None) is not None:
            overrides[key] = getattr(args, key)
    config = load_run_config(resolve_config_path(args.config or default_config), overrides)
    run_dir = config.run_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    get_logger(log_file=run_dir / RUN_LOG)
    save_resolved_config(config, run_dir / RESOLVED_CONFIG)
    logger.keyinfo(f"run=start command={args.command} run_dir={run_dir} seed={config.seed}")
    return config


def _load_split(config: RunConfig, name: str, split: str, limit: Optional[int] = None) -> List[RGBDPair]:
    count = limit
    if name == settings.SYNTHETIC and count is None:
        count = config.data.synthetic_count
    return load_dataset(name, split, config.data.root, seed=config.seed, count=count, size=config.data.synthetic_size)


def cmd_prepare_data(args: argparse.Namespace) -> int:
    root = vars(args).get("data.root") or settings.DATA_ROOT
    if args.kind == "synth":
        seed = args.seed if args.seed is not None else 0
        dirs = write_synthetic_dataset(root, args.count, seed, size=args.size, test_count=args.test_count)
        for split, directory in dirs.items():
            print(f"{split}: {directory}")
    else:
        counts = convert_release(args.source, args.dataset, root)
        for split, count in counts.items():
            print(f"{args.dataset}/{split}: {count} pairs")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    config = _prepare_run(args)
    configure_determinism()
    pairs = _load_split(config, config.data.dataset, "train")
    print_run_summary(config, {"Train pairs": len(pairs)})
    result = train(config, pairs, run_dir=config.run_dir)
    print(f"checkpoint: {result.checkpoint_path}  final loss: {result.final_loss:.6f}")
    return EXIT_OK


def _default_noise_domain(args: argparse.Namespace) -> Dict[str, Any]:
    # disparity benchmarks take x = 1/d unless a flag or config file says otherwise
    datasets = vars(args).get("eval.datasets") or []
    if args.config is None and vars(args).get("degradation.noise_domain") is None and datasets:
        if all(name in settings.DISPARITY_DATASETS for name in datasets):
            return {"degradation.noise_domain": NoiseDomain.INVERSE.value}
    return {}


def check_noise_domain(config: RunConfig) -> bool:
    """Warn when disparity benchmarks get noise in the depth domain; returns whether it warned."""
    degradation = config.degradation
    if degradation.noise_sigma <= 0 or NoiseDomain(degradation.noise_domain) != NoiseDomain.DEPTH:
        return False
    disparity = [name for name in config.eval.datasets if name in settings.DISPARITY_DATASETS]
    if not disparity:
        return False
    logger.warning(
        f"eval=noise_domain_mismatch datasets={','.join(disparity)} noise_domain=depth "
        f"sigma={degradation.noise_sigma} hint=\"pass --noise-domain inverse for x = 1/d\""
    )
    return True


def cmd_eval(args: argparse.Namespace) -> int:
    config = _prepare_run(args, extra=_default_noise_domain(args))
    check_noise_domain(config)
    if config.eval.checkpoint is None and config.eval.baseline is None:
        raise ConfigError("eval needs --checkpoint or --baseline bicubic")
    if config.eval.checkpoint is not None:
        checkpoint = load_checkpoint(config.eval.checkpoint)
        predictor = ModelPredictor(restore_model(checkpoint), chunk_size=config.model.chunk_size)
        out_dir = config.run_dir / "eval_jiif"
    else:
        predictor = BicubicPredictor()
        out_dir = config.run_dir / "eval_bicubic"

    datasets = {name: _load_split(config, name, "test", args.limit) for name in config.eval.datasets}
    report = run_benchmark(
        predictor,
        datasets,
        config.eval.scales,
        noise=config.degradation,
        seed=config.seed,
        crop_border=config.eval.crop_border,
        maps_dir=out_dir / "maps" if config.eval.save_maps else None,
        config=config,
    )
    renderer = ReportRenderer()
    table = renderer.benchmark_table([report], with_references=config.degradation.noise_sigma == 0)
    if settings.MIDDLEBURY_NOISY in datasets:
        table += "\n" + renderer.noisy_table([report])
    write_report(report, out_dir, table=table)
    print(table)
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    config = _prepare_run(args, default_config="ablation_synthetic")
    configure_determinism()
    train_pairs = _load_split(config, config.data.dataset, "train")
    test_pairs = _load_split(config, config.data.dataset, "test")
    print_run_summary(config, {"Train pairs": len(train_pairs), "Test pairs": len(test_pairs)})
    report = run_ablation(config, train_pairs, test_pairs, run_dir=config.run_dir)
    table = ReportRenderer().ablation_table(report)
    (config.run_dir / "ablation.txt").write_text(table, encoding="utf-8")
    (config.run_dir / "ablation.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
    print(table)
    return EXIT_OK


def _infer_pair(args: argparse.Namespace, config: RunConfig) -> RGBDPair:
    if args.dataset:
        pairs = _load_split(config, args.dataset, "test", limit=args.index + 1)
        if args.index >= len(pairs):
            raise DataError(f"dataset '{args.dataset}' has no pair at index {args.index}")
        return pairs[args.index]
    if not (args.rgb and args.depth):
        raise ConfigError("infer needs --rgb and --depth, or --dataset")
    depth_path = Path(args.depth)
    if depth_path.suffix == ".npy":
        if not depth_path.is_file():
            raise DataError(f"missing depth array: {depth_path}")
        depth = torch.from_numpy(np.squeeze(np.load(depth_path)).astype(np.float32)[None])
    else:
        depth = read_depth(depth_path, args.depth_scale_factor)
    return RGBDPair(
        guide=read_guide(Path(args.rgb)),
        depth=depth,
        name=depth_path.stem,
        scale_factor=args.depth_scale_factor,
    )


def cmd_infer(args: argparse.Namespace) -> int:
    config = _prepare_run(args)
    model = restore_model(load_checkpoint(args.checkpoint))
    pair = _infer_pair(args, config)
    out_dir = Path(args.out) if args.out else config.run_dir / "infer"
    name = pair.name or "pair"
    seed = derive_seed(config.seed, "infer", name)

    score, prediction, hr_pair = evaluate_pair(ModelPredictor(model), pair, config.degradation, seed)
    degraded = degrade(pair, config.degradation, seed)
    stats = depth_stats(hr_pair.depth)
    lr_norm = normalize_with(degraded.lr_depth, stats)
    bicubic = denormalize(bicubic_resample(lr_norm, hr_pair.height, hr_pair.width), stats)

    save_error_map(prediction, hr_pair.depth, out_dir / name, scale_factor=pair.scale_factor)
    save_error_map(bicubic, hr_pair.depth, out_dir / f"{name}_bicubic", scale_factor=pair.scale_factor)
    print(f"{name}: rmse={score:.4f} bicubic_rmse={rmse(bicubic, hr_pair.depth):.4f} -> {out_dir}")

    if args.dump_weights:
        dtype = next(model.parameters()).dtype
        inspection = model.inspect_weights(lr_norm.to(dtype), hr_pair.guide.to(dtype), args.dump_weights)
        row, col = inspection.pixel
        weights_path = out_dir / f"{name}_weights_{row}_{col}.yaml"
        weights_path.write_text(yaml.safe_dump(inspection.to_dict(), sort_keys=False), encoding="utf-8")
        plot_weight_inspection(
            inspection,
            hr_pair.guide.numpy().transpose(1, 2, 0),
            out_dir / f"{name}_weights_{row}_{col}.png",
            scale=config.degradation.scale,
        )
        print(f"weights: {weights_path}")
    return EXIT_OK


def cmd_demo(args: argparse.Namespace) -> int:
    extra = {} if vars(args).get("train.max_steps") is not None else {"train.max_steps": 200}
    config = _prepare_run(args, default_config="synthetic_desk", extra=extra)
    configure_determinism()
    train_pairs = _load_split(config, settings.SYNTHETIC, "train")
    test_pairs = _load_split(config, settings.SYNTHETIC, "test")
    print_run_summary(config, {"Train pairs": len(train_pairs), "Test pairs": len(test_pairs)})

    result = train(config, train_pairs, run_dir=config.run_dir)
    predictors = (BicubicPredictor(), ModelPredictor(restore_model(result.checkpoint)))
    maps_dir = config.run_dir / "maps"
    reports = [
        run_benchmark(
            predictor,
            {settings.SYNTHETIC: test_pairs},
            [config.degradation.scale],
            noise=config.degradation,
            seed=config.seed,
            maps_dir=maps_dir / predictor.label.lower(),
            config=config,
        )
        for predictor in predictors
    ]
    table = ReportRenderer().benchmark_table(reports, with_references=False)
    for report in reports:
        write_report(report, config.run_dir / f"eval_{report.method.lower()}", table=table)
    print(table)
    return EXIT_OK


COMMANDS = {
    "prepare-data": cmd_prepare_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "infer": cmd_infer,
    "demo": cmd_demo,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.debug:
        settings.DEBUG_CHECKS = True
    try:
        if args.log_level:
            try:
                get_logger(level=args.log_level)
            except ValueError as e:
                raise ConfigError(str(e)) from e
        return COMMANDS[args.command](args)
    except JIIFError as e:
        logger.error(f"command={args.command} error={type(e).__name__} exit_code={e.exit_code} detail=\"{e}\"")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.exception(f"command={args.command} error={type(e).__name__} exit_code=1")
        print(f"error: {e}", file=sys.stderr)
        return 1
    finally:
        detach_file_handlers()


if __name__ == "__main__":
    sys.exit(main())
