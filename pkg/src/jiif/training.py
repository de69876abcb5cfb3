"""
Optimization loop: L1 loss on sampled HR pixels, Adam, step-decayed learning rate,
periodic checkpoints and a loss-curve log.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
import torch
from torch.optim import Adam
from torch.optim.lr_scheduler import LambdaLR

from src.jiif.checkpoint import (
    Checkpoint,
    model_state_of,
    save_checkpoint,
    write_latest_pointer,
)
from src.jiif.config import RunConfig, TrainConfig
from src.jiif.data import RGBDPair, collate, sample_training_patch
from src.jiif.exceptions import InvalidArgumentError, NumericError
from src.jiif.model import JIIFModel, build_model
from src.jiif.reporting.plots import plot_loss_curve
from src.jiif.seeding import derive_seed, numpy_rng
from utils.ml_logging import get_logger, log_function_call

logger = get_logger()

LOSS_CURVE_CSV = "loss_curve.csv"
LOSS_CURVE_PNG = "loss_curve.png"


def l1_loss(predicted: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute error over all queries."""
    if predicted.shape != target.shape:
        raise InvalidArgumentError(
            f"prediction {tuple(predicted.shape)} and target {tuple(target.shape)} differ in shape"
        )
    if predicted.numel() == 0:
        raise InvalidArgumentError("l1_loss needs at least one value")
    return (predicted - target).abs().mean()


def learning_rate_at(epoch: int, lr0: float, decay_factor: float = 0.2, decay_epochs: int = 60) -> float:
    """Learning rate in effect during 1-based ``epoch``."""
    if epoch < 1:
        raise InvalidArgumentError(f"epochs are 1-based, got {epoch}")
    return lr0 * decay_factor ** ((epoch - 1) // decay_epochs)


def lr_schedule(train: TrainConfig) -> List[float]:
    return [
        learning_rate_at(epoch, train.lr, train.lr_decay_factor, train.lr_decay_epochs)
        for epoch in range(1, train.epochs + 1)
    ]


def checkpoint_name(epoch: int) -> str:
    return f"ckpt_{epoch}"


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    checkpoint_path: Optional[Path]
    history: pd.DataFrame

    @property
    def final_loss(self) -> float:
        return float(self.history["loss"].iloc[-1]) if len(self.history) else math.nan


class Trainer:
    """
    Single-process trainer.

    Every random draw derives from ``config.seed``: the model streams, the per-epoch
    pair order and each patch, so a run is reproducible from its resolved config.
    """

    def __init__(
        self,
        config: RunConfig,
        pairs: Sequence[RGBDPair],
        run_dir: Optional[Path] = None,
        model: Optional[JIIFModel] = None,
    ):
        if not pairs:
            raise InvalidArgumentError("training needs at least one pair")
        self.config = config
        self.pairs = list(pairs)
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.model = model if model is not None else build_model(config.model, config.seed)

        train = config.train
        self.optimizer = Adam(
            self.model.parameters(), lr=train.lr, betas=tuple(train.betas), eps=train.eps
        )
        self.scheduler = LambdaLR(
            self.optimizer,
            lr_lambda=lambda index: train.lr_decay_factor ** (index // train.lr_decay_epochs),
        )
        self.step = 0
        self.epoch = 0
        self.history: List[Dict[str, float]] = []

    @property
    def current_lr(self) -> float:
        return float(self.optimizer.param_groups[0]["lr"])

    def _batches(self, epoch: int):
        order = numpy_rng(self.config.seed, "order", epoch).permutation(len(self.pairs))
        size = self.config.train.batch_size
        for start in range(0, len(order), size):
            yield [int(i) for i in order[start : start + size]]

    def _sample_batch(self, epoch: int, indices: Sequence[int]) -> Dict[str, torch.Tensor]:
        data = self.config.data
        samples = [
            sample_training_patch(
                self.pairs[index],
                self.config.degradation,
                derive_seed(self.config.seed, "patch", epoch, self.step, index),
                patch_size=data.patch_size,
                samples=data.samples_per_patch,
                flip_probability=data.flip_probability,
            )
            for index in indices
        ]
        return collate(samples)

    def train_step(self, batch: Dict[str, torch.Tensor]) -> float:
        self.model.train()
        try:
            predicted = self.model(
                batch["lr_depth"], batch["hr_guide"], batch["query_coords"], base=batch["bicubic_base"]
            )
            loss = l1_loss(predicted, batch["target_values"])
            if not torch.isfinite(loss):
                raise NumericError("non-finite loss")
        except NumericError as e:
            path = self._save(self.epoch, name=f"diagnostic_step{self.step + 1}", update_latest=False)
            logger.error(f"train=numeric_failure step={self.step + 1} epoch={self.epoch} diagnostic={path} detail=\"{e}\"")
            raise NumericError(f"{e} at step {self.step + 1}; diagnostic checkpoint: {path}") from e
        self.optimizer.zero_grad(set_to_none=True)
        loss.backward()
        self.optimizer.step()
        self.step += 1
        return float(loss.detach())

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(
            model_state=model_state_of(self.model),
            optimizer_state=self.optimizer.state_dict(),
            epoch=self.epoch,
            step=self.step,
            seed=self.config.seed,
            config=self.config.model_dump(mode="json"),
        )

    def _save(self, epoch: int, name: Optional[str] = None, update_latest: bool = True) -> Optional[Path]:
        if self.run_dir is None:
            return None
        path = save_checkpoint(self.checkpoint(), self.run_dir / (name or checkpoint_name(epoch)))
        if update_latest:
            write_latest_pointer(self.run_dir, path)
        return path

    def _write_loss_curve(self, history: pd.DataFrame) -> None:
        if self.run_dir is None or history.empty:
            return
        history.to_csv(self.run_dir / LOSS_CURVE_CSV, index=False)
        plot_loss_curve(history, self.run_dir / LOSS_CURVE_PNG)

    @log_function_call()
    def fit(self) -> TrainResult:
        train = self.config.train
        if self.run_dir is not None:
            self.run_dir.mkdir(parents=True, exist_ok=True)
        logger.keyinfo(
            f"train=start run={self.config.run_name} pairs={len(self.pairs)} epochs={train.epochs} "
            f"scale={self.config.degradation.scale} max_steps={train.max_steps}"
        )
        last_path: Optional[Path] = None
        stop = False
        for epoch in range(1, train.epochs + 1):
            self.epoch = epoch
            lr = self.current_lr
            epoch_losses = []
            for indices in self._batches(epoch):
                loss = self.train_step(self._sample_batch(epoch, indices))
                epoch_losses.append(loss)
                self.history.append({"step": self.step, "epoch": epoch, "lr": lr, "loss": loss})
                if self.step % train.log_every == 0:
                    logger.info(f"step={self.step} epoch={epoch} lr={lr:.3e} loss={loss:.6f}")
                if train.max_steps is not None and self.step >= train.max_steps:
                    stop = True
                    break
            self.scheduler.step()
            mean_loss = sum(epoch_losses) / len(epoch_losses)
            logger.keyinfo(f"epoch={epoch} steps={self.step} lr={lr:.3e} mean_loss={mean_loss:.6f}")
            if stop or epoch == train.epochs or epoch % train.checkpoint_every == 0:
                last_path = self._save(epoch) or last_path
            if stop:
                logger.keyinfo(f"train=max_steps_reached step={self.step} epoch={epoch}")
                break

        history = pd.DataFrame(self.history, columns=["step", "epoch", "lr", "loss"])
        self._write_loss_curve(history)
        logger.keyinfo(f"train=done steps={self.step} final_loss={history['loss'].iloc[-1]:.6f}")
        return TrainResult(checkpoint=self.checkpoint(), checkpoint_path=last_path, history=history)


def train(config: RunConfig, pairs: Sequence[RGBDPair], run_dir: Optional[Path] = None) -> TrainResult:
    """Train a freshly built model on ``pairs``."""
    return Trainer(config, pairs, run_dir=run_dir).fit()
