"""Shared fixtures: rig, tiny network configs and a tiny generated dataset."""

from pathlib import Path

import numpy as np
import pytest
from loguru import logger

from src.calibnet.config import ModelConfig
from src.dataset.generator import DatasetConfig, generate_dataset
from src.dataset.storage import SplitCounts, load_split
from src.geometry.transforms import DecalRanges
from src.simulation.radar import RadarModel
from src.simulation.rig import PRIMARY_RIG, RigConfig, build_rig
from src.simulation.scene import SceneConfig

TINY_SIZE = (32, 20)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def rig() -> RigConfig:
    return build_rig(PRIMARY_RIG)


@pytest.fixture
def tiny_model_config() -> ModelConfig:
    return ModelConfig(
        image_size=TINY_SIZE,
        backbone_channels=[4, 8],
        mlpconv_layers=1,
        mlpconv_maps=4,
        mlpconv_kernel=3,
        embed_dim=8,
        head=[16, 4],
        dropout_p=0.1,
    )


def tiny_dataset_config(
    train: int = 8, val: int = 4, test: int = 6
) -> DatasetConfig:
    return DatasetConfig(
        counts=SplitCounts(train=train, val=val, test=test),
        image_size=TINY_SIZE,
        min_correspondences=5,
        max_skip_rate=0.9,
    )


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory: pytest.TempPathFactory, rig) -> Path:
    out = tmp_path_factory.mktemp("dataset")
    generate_dataset(
        out,
        SceneConfig(),
        RadarModel(),
        rig,
        DecalRanges(),
        tiny_dataset_config(),
        seed=7,
        threads=2,
    )
    return out


@pytest.fixture(scope="session")
def tiny_splits(tiny_dataset: Path) -> dict[str, list]:
    return {
        split: load_split(tiny_dataset, split)
        for split in ("train", "val", "test")
    }


@pytest.fixture
def log_messages():
    """Collect loguru messages emitted during a test."""
    messages: list[str] = []
    handler = logger.add(messages.append, level="DEBUG", format="{message}")
    yield messages
    logger.remove(handler)
