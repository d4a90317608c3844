"""Run configuration: one YAML file describing a reproducible run."""

from pathlib import Path

import yaml
from pydantic import BaseModel, Field, ValidationError, model_validator

from src.calibnet.config import LossConfig, ModelConfig
from src.cascade.training import TrainConfig
from src.config.logging import logger
from src.dataset.generator import DatasetConfig
from src.evaluation.protocols import EvalConfig
from src.exceptions import ConfigInvalid, IoFailure
from src.geometry.transforms import DecalRanges
from src.simulation.radar import RadarModel
from src.simulation.rig import RIG_PRESETS, RigSpec
from src.simulation.scene import SceneConfig


def describe_validation_error(exc: ValidationError) -> str:
    """Join pydantic errors as ``field.path: message`` lines."""
    return "; ".join(
        f"{'.'.join(str(part) for part in error['loc']) or '<root>'}: "
        f"{error['msg']}"
        for error in exc.errors()
    )


class RunConfig(BaseModel):
    """Everything needed to reproduce simulation, training and evaluation."""

    seed: int = Field(0, ge=0, description="Master seed of every rng stream")
    output_dir: Path = Field(
        Path("runs"), description="Default output directory"
    )
    scene: SceneConfig = Field(default_factory=SceneConfig)
    radar: RadarModel = Field(default_factory=RadarModel)
    rig: str | RigSpec = Field(
        "primary", description="Rig preset name or explicit rig parameters"
    )
    decalibration: DecalRanges = Field(default_factory=DecalRanges)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    evaluation: EvalConfig = Field(default_factory=EvalConfig)

    @model_validator(mode="after")
    def check_consistency(self) -> "RunConfig":
        """Require a known rig preset and matching input sizes."""
        if isinstance(self.rig, str) and self.rig not in RIG_PRESETS:
            raise ValueError(
                f"rig: unknown preset '{self.rig}', "
                f"expected one of {sorted(RIG_PRESETS)}"
            )
        if tuple(self.model.image_size) != tuple(self.dataset.image_size):
            raise ValueError(
                f"model.image_size {self.model.image_size} differs from "
                f"dataset.image_size {self.dataset.image_size}"
            )
        return self

    def rig_spec(self) -> RigSpec:
        """Resolve the rig preset."""
        if isinstance(self.rig, RigSpec):
            return self.rig
        return RIG_PRESETS[self.rig]

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        """Validate a parsed mapping.

        Raises
        ------
            ConfigInvalid: Naming the path of every failing field
        """
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            raise ConfigInvalid(
                f"invalid configuration: {describe_validation_error(exc)}"
            ) from exc

    @classmethod
    def load_from_yaml(cls, config_path: str | Path | None = None) -> "RunConfig":
        """Load configuration from a YAML file.

        Args:
            config_path: Path to the config file. A missing file yields
                the defaults.

        Returns
        -------
            Validated configuration

        Raises
        ------
            ConfigInvalid: If the file is not YAML or fails validation
        """
        config_path = Path(
            "radcam_config.yaml" if config_path is None else config_path
        )
        if not config_path.exists():
            logger.warning(
                f"Config file {config_path} not found. Using defaults."
            )
            return cls()
        try:
            with open(config_path, encoding="utf-8") as file:
                data = yaml.safe_load(file) or {}
        except yaml.YAMLError as exc:
            raise ConfigInvalid(f"cannot parse {config_path}: {exc}") from exc
        except OSError as exc:
            raise IoFailure(f"cannot read {config_path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigInvalid(f"{config_path} must contain a mapping")
        config = cls.from_dict(data)
        logger.info(f"Loaded run config from {config_path}")
        return config

    def dump_yaml(self, path: Path) -> None:
        """Write the configuration snapshot.

        Raises
        ------
            IoFailure: If the file cannot be written
        """
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8") as file:
                yaml.safe_dump(
                    self.model_dump(mode="json"), file, sort_keys=False
                )
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc
