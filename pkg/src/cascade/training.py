"""Single-stage training loop."""

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from tqdm import tqdm

from src.calibnet.config import LossConfig
from src.calibnet.losses import compute_loss
from src.calibnet.model import CalibNet, batch_inputs
from src.cascade.schedule import PlateauSchedule
from src.config.logging import logger, progress_enabled
from src.dataset.sample import Sample
from src.exceptions import EmptyDataset
from src.nn.optim import AdamState, adam_step
from src.nn.tensor import backward, no_grad
from src.utils.rng import STREAM_TRAINING, derive_rng

HISTORY_COLUMNS = ["stage", "epoch", "train_loss", "val_loss", "lr"]


class TrainConfig(BaseModel):
    """Optimizer and schedule settings shared by both stages."""

    learning_rate: float = Field(0.002, gt=0.0)
    plateau_factor: float = Field(0.2, gt=0.0, lt=1.0)
    plateau_patience: int = Field(5, ge=1)
    early_stop_patience: int = Field(10, ge=1)
    batch_size: int = Field(16, ge=1)
    max_epochs: int = Field(150, ge=0)
    seed: int = 0


@dataclass(frozen=True)
class EpochRecord:
    """Losses of one finished epoch and the learning rate it used."""

    stage: int
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def __len__(self) -> int:
        return len(self.records)

    def to_frame(self) -> pd.DataFrame:
        """History as a table with :data:`HISTORY_COLUMNS`."""
        return pd.DataFrame(
            [vars(r) for r in self.records], columns=HISTORY_COLUMNS
        )


def _labels(samples: Sequence[Sample]) -> np.ndarray:
    return np.stack([s.label.as_array() for s in samples])


def evaluate_loss(
    model: CalibNet,
    samples: Sequence[Sample],
    loss_config: LossConfig,
    batch_size: int = 32,
) -> float:
    """Mean inference-mode loss over samples."""
    total = 0.0
    with no_grad():
        for start in range(0, len(samples), batch_size):
            batch = samples[start : start + batch_size]
            images, radar = batch_inputs(batch)
            loss = compute_loss(
                loss_config, _labels(batch), model.forward(images, radar)
            )
            total += loss.item() * len(batch)
    return total / len(samples)


def train_stage(
    model: CalibNet,
    train: Sequence[Sample],
    val: Sequence[Sample],
    config: TrainConfig,
    loss_config: LossConfig,
    stage: int = 1,
) -> tuple[CalibNet, TrainHistory]:
    """Train one cascade stage with plateau reduction and early stopping.

    Batches are shuffled by an rng derived from ``config.seed`` and
    ``stage``. After training the model holds the weights of the epoch with
    the best validation loss.

    Args:
        model: Network to train in place
        train: Training samples
        val: Validation samples
        config: Optimizer and schedule settings
        loss_config: Loss selection
        stage: Cascade stage number, used for rng streams and history

    Returns
    -------
        The model and its per-epoch history

    Raises
    ------
        EmptyDataset: If either split is empty
    """
    if not train or not val:
        raise EmptyDataset(
            f"stage {stage} needs samples: {len(train)} train, {len(val)} val"
        )
    history = TrainHistory()
    if config.max_epochs == 0:
        return model, history

    rng = derive_rng(config.seed, STREAM_TRAINING, stage)
    params = model.parameters()
    state = AdamState.for_params(params, config.learning_rate)
    schedule = PlateauSchedule(
        learning_rate=config.learning_rate,
        factor=config.plateau_factor,
        plateau_patience=config.plateau_patience,
        early_stop_patience=config.early_stop_patience,
    )
    best_state = model.state_dict()
    epochs = tqdm(
        range(1, config.max_epochs + 1),
        desc=f"stage {stage}",
        disable=not progress_enabled(),
    )
    for epoch in epochs:
        lr = schedule.learning_rate
        state.learning_rate = lr
        order = rng.permutation(len(train))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [train[i] for i in order[start : start + config.batch_size]]
            images, radar = batch_inputs(batch)
            for param in params:
                param.zero_grad()
            outputs = model.forward(images, radar, training=True, rng=rng)
            loss = compute_loss(loss_config, _labels(batch), outputs)
            backward(loss)
            adam_step(params, [p.grad for p in params], state)
            total += loss.item() * len(batch)
        train_loss = total / len(train)
        val_loss = evaluate_loss(model, val, loss_config)
        history.records.append(
            EpochRecord(stage, epoch, train_loss, val_loss, lr)
        )
        logger.info(
            f"Stage {stage} epoch {epoch}: train loss {train_loss:.5f}, "
            f"val loss {val_loss:.5f}, lr {lr:.3g}"
        )
        epochs.set_postfix(train=f"{train_loss:.4f}", val=f"{val_loss:.4f}")
        if schedule.step(epoch, val_loss):
            best_state = model.state_dict()
        if schedule.stopped:
            break
    model.load_state_dict(best_state)
    history.best_epoch = schedule.best_epoch
    logger.info(
        f"Stage {stage} finished: best val loss {schedule.best_loss:.5f} "
        f"at epoch {schedule.best_epoch}"
    )
    return model, history
