"""Run directory: checkpoints, training history and run metadata."""

import json
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from src.calibnet.config import LossConfig, ModelConfig
from src.calibnet.model import CalibNet, build_model
from src.cascade.cascade import CascadeModel
from src.cascade.training import HISTORY_COLUMNS
from src.config.logging import logger
from src.exceptions import ArtifactVersionMismatch, IoFailure
from src.nn.checkpoint import load_parameters, save_parameters

RUN_FORMAT_VERSION = 1
STAGE_FILES = ("stage1.ckpt", "stage2.ckpt")


class RunRecord(BaseModel):
    """Contents of ``run.json``."""

    version: int = RUN_FORMAT_VERSION
    rig_id: str
    model: ModelConfig
    loss: LossConfig
    best_epochs: list[int] = []


def save_run(run_dir: Path, cascade: CascadeModel, rig_id: str) -> None:
    """Write both checkpoints, ``history.csv`` and ``run.json``.

    Raises
    ------
        ValueError: If a stage is not a trained network
        IoFailure: If a file cannot be written
    """
    stages = (cascade.coarse, cascade.fine)
    if not all(isinstance(s, CalibNet) for s in stages):
        raise ValueError("only network stages can be saved")
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        for name, stage in zip(STAGE_FILES, stages, strict=True):
            save_parameters(run_dir / name, stage.state_dict())
        frames = [h.to_frame() for h in cascade.histories]
        history = (
            pd.concat(frames, ignore_index=True)
            if frames
            else pd.DataFrame(columns=HISTORY_COLUMNS)
        )
        history.to_csv(run_dir / "history.csv", index=False)
        record = RunRecord(
            rig_id=rig_id,
            model=cascade.model_config,
            loss=cascade.loss_config,
            best_epochs=[h.best_epoch for h in cascade.histories],
        )
        (run_dir / "run.json").write_text(
            json.dumps(record.model_dump(mode="json"), indent=2) + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise IoFailure(f"cannot write run directory {run_dir}: {exc}") from exc
    logger.info(f"Saved run to {run_dir}")


def read_run_record(run_dir: Path) -> RunRecord:
    """Parse and version-check ``run.json``."""
    path = run_dir / "run.json"
    if not path.exists():
        raise ArtifactVersionMismatch(f"no run metadata at {path}")
    try:
        record = RunRecord.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise ArtifactVersionMismatch(f"malformed {path}: {exc}") from exc
    if record.version != RUN_FORMAT_VERSION:
        raise ArtifactVersionMismatch(
            f"run format version {record.version}, expected "
            f"{RUN_FORMAT_VERSION}"
        )
    return record


def load_run(run_dir: Path) -> tuple[CascadeModel, RunRecord]:
    """Rebuild a trained cascade from its run directory."""
    record = read_run_record(run_dir)
    stages = []
    for name in STAGE_FILES:
        model = build_model(record.model, np.random.default_rng(0))
        model.load_state_dict(load_parameters(run_dir / name))
        stages.append(model)
    logger.debug(f"Loaded run from {run_dir}")
    cascade = CascadeModel(stages[0], stages[1], record.model, record.loss)
    return cascade, record
