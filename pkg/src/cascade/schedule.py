"""Learning-rate plateau reduction with early stopping."""

import math
from dataclasses import dataclass

from src.config.logging import logger


@dataclass
class PlateauSchedule:
    """Tracks the best validation loss across epochs.

    Both counters reset on an improvement larger than ``min_delta``. A
    learning-rate reduction resets only the plateau counter, so training
    stops ``early_stop_patience`` epochs after the last improvement.
    """

    learning_rate: float
    factor: float = 0.2
    plateau_patience: int = 5
    early_stop_patience: int = 10
    min_delta: float = 1e-6
    best_loss: float = math.inf
    best_epoch: int = 0
    plateau_count: int = 0
    stale_count: int = 0
    stopped: bool = False

    def step(self, epoch: int, val_loss: float) -> bool:
        """Record an epoch's validation loss.

        Returns
        -------
            True if the loss improved on the best one so far
        """
        if val_loss < self.best_loss - self.min_delta:
            self.best_loss = val_loss
            self.best_epoch = epoch
            self.plateau_count = 0
            self.stale_count = 0
            return True
        self.plateau_count += 1
        self.stale_count += 1
        if self.plateau_count >= self.plateau_patience:
            self.learning_rate *= self.factor
            self.plateau_count = 0
            logger.info(
                f"Epoch {epoch}: validation loss plateaued, learning rate "
                f"reduced to {self.learning_rate:.3g}"
            )
        if self.stale_count >= self.early_stop_patience:
            self.stopped = True
            logger.info(
                f"Epoch {epoch}: early stop, best epoch {self.best_epoch}"
            )
        return False
