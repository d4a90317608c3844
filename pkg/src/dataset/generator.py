"""Dataset generation from simulated frames and random decalibrations."""

import math
from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from contextlib import closing
from dataclasses import dataclass
from pathlib import Path
from typing import TypeVar

import numpy as np
from pydantic import BaseModel, Field
from tqdm import tqdm

from src.config.logging import logger, progress_enabled
from src.dataset.image import ImageStats, ImageStatsAccumulator, resize_image
from src.dataset.sample import MIN_CORRESPONDENCES, Sample, make_sample
from src.dataset.storage import (
    SPLITS,
    DatasetManifest,
    SplitCounts,
    StatsRecord,
    write_manifest,
    write_sample,
)
from src.exceptions import InsufficientFrames
from src.geometry.transforms import (
    DecalRanges,
    Decalibration,
    sample_decalibration,
)
from src.simulation.frames import Frame, simulate_frame
from src.simulation.radar import RadarModel, detections_to_array
from src.simulation.rig import RigConfig
from src.simulation.scene import SceneConfig
from src.utils.rng import STREAM_DECALIBRATION, derive_rng

T = TypeVar("T")


class DatasetConfig(BaseModel):
    """Sizes and filter settings of a generated dataset."""

    counts: SplitCounts = Field(default_factory=SplitCounts)
    image_size: tuple[int, int] = Field(
        (240, 150), description="Network input (width, height)"
    )
    min_correspondences: int = Field(MIN_CORRESPONDENCES, ge=0)
    max_decal_attempts: int = Field(
        20, ge=1, description="Decalibrations tried per frame before skipping"
    )
    max_skip_rate: float = Field(
        0.5, ge=0.0, lt=1.0, description="Fraction of frames allowed to skip"
    )


@dataclass(frozen=True)
class _Accepted:
    frame_index: int
    decalibration: Decalibration


@dataclass(frozen=True, eq=False)
class _SimulationContext:
    scene_cfg: SceneConfig
    radar_model: RadarModel
    rig: RigConfig
    ranges: DecalRanges
    config: DatasetConfig
    seed: int

    def frame(self, split_index: int, frame_index: int) -> Frame:
        return simulate_frame(
            f"{SPLITS[split_index]}/{frame_index:06d}",
            self.scene_cfg,
            self.radar_model,
            self.rig,
            self.seed,
            (split_index, frame_index),
        )

    def accept(
        self, split_index: int, frame_index: int, stats: ImageStats
    ) -> tuple[Frame, Sample | None]:
        """Try fresh decalibrations until one passes the filter."""
        frame = self.frame(split_index, frame_index)
        rng = derive_rng(
            self.seed, split_index, frame_index, STREAM_DECALIBRATION
        )
        points = detections_to_array(frame.detections)
        for _ in range(self.config.max_decal_attempts):
            d = sample_decalibration(self.ranges, rng)
            sample = make_sample(
                frame.image,
                points,
                self.rig,
                d,
                stats=stats,
                image_size=self.config.image_size,
                min_correspondences=self.config.min_correspondences,
                frame_id=frame.frame_id,
            )
            if sample is not None:
                return frame, sample
        return frame, None


def _ordered_map(
    fn: Callable[[int], T], threads: int, chunk: int
) -> Iterator[tuple[int, T]]:
    """Apply ``fn`` to 0, 1, 2, ... in parallel, yielding in index order."""
    with ThreadPoolExecutor(max_workers=threads) as pool:
        start = 0
        while True:
            indices = range(start, start + chunk)
            yield from zip(indices, pool.map(fn, indices), strict=True)
            start += chunk


def _collect(
    split_index: int,
    context: _SimulationContext,
    stats: ImageStats,
    threads: int,
    on_accept: Callable[[int, Frame, Sample], None],
) -> int:
    """Walk frames of a split until enough samples were accepted.

    Returns
    -------
        Number of skipped frames

    Raises
    ------
        InsufficientFrames: If more than ``max_skip_rate`` of the frames
            had to be skipped
    """
    split = SPLITS[split_index]
    count = context.config.counts.get(split)
    if count == 0:
        return 0
    rate = context.config.max_skip_rate
    frame_budget = max(count, math.floor(count / (1.0 - rate)))
    accepted = skipped = 0

    def job(frame_index: int) -> tuple[Frame, Sample | None]:
        return context.accept(split_index, frame_index, stats)

    progress = tqdm(
        total=count, desc=f"{split} samples", disable=not progress_enabled()
    )
    chunk = max(4 * threads, 8)
    with progress, closing(_ordered_map(job, threads, chunk)) as results:
        for frame_index, (frame, sample) in results:
            if frame_index >= frame_budget:
                break
            if sample is None:
                skipped += 1
                logger.trace(f"Skipped frame {frame.frame_id}")
            else:
                on_accept(accepted, frame, sample)
                accepted += 1
                progress.update(1)
            if accepted == count:
                break
    attempted = accepted + skipped
    if accepted < count or skipped > rate * attempted:
        raise InsufficientFrames(
            f"{split}: {skipped} of {attempted} frames skipped, "
            f"{accepted}/{count} samples accepted "
            f"(max skip rate {rate:.0%})"
        )
    logger.info(
        f"{split}: accepted {accepted} samples, skipped {skipped} frames"
    )
    return skipped


def generate_dataset(
    out: Path,
    scene_cfg: SceneConfig,
    radar_model: RadarModel,
    rig: RigConfig,
    ranges: DecalRanges,
    config: DatasetConfig,
    seed: int,
    threads: int = 1,
) -> DatasetManifest:
    """Generate train, validation and test splits into ``out``.

    Frame ``i`` of split ``s`` is simulated from its own rng streams
    ``(s, i, stream)``, so the splits never share a frame and the result
    does not depend on ``threads``. A frame whose decalibration leaves fewer
    than ``min_correspondences`` detections in the image is retried with a
    fresh decalibration and skipped after ``max_decal_attempts``.

    Image statistics come from the training split only: the training frames
    are accepted in a first pass that accumulates the statistics and are
    re-simulated and written in a second pass.

    Args:
        out: Dataset directory
        scene_cfg: Traffic parameters
        radar_model: Radar measurement model
        rig: Sensor rig
        ranges: Decalibration sampling ranges
        config: Split sizes and filter settings
        seed: Master seed
        threads: Worker threads

    Returns
    -------
        The manifest written to ``out/manifest.json``

    Raises
    ------
        InsufficientFrames: If a split skips too many frames
    """
    context = _SimulationContext(
        scene_cfg, radar_model, rig, ranges, config, seed
    )
    accumulator = ImageStatsAccumulator()
    train: list[_Accepted] = []

    def remember(_: int, frame: Frame, sample: Sample) -> None:
        index = int(frame.frame_id.rsplit("/", 1)[1])
        train.append(_Accepted(index, sample.phi_dec))
        accumulator.add(resize_image(frame.image, config.image_size))

    _collect(0, context, ImageStats(), threads, remember)
    stats = accumulator.finalize()
    logger.info(
        f"Image statistics: mean {np.round(stats.mean, 3).tolist()}, "
        f"std {np.round(stats.std, 3).tolist()}"
    )

    for split_index in (1, 2):
        split = SPLITS[split_index]

        def store(
            index: int, _: Frame, sample: Sample, split: str = split
        ) -> None:
            write_sample(out, split, index, sample)

        _collect(split_index, context, stats, threads, store)

    def rebuild(item: _Accepted) -> Sample:
        frame = context.frame(0, item.frame_index)
        sample = make_sample(
            frame.image,
            detections_to_array(frame.detections),
            rig,
            item.decalibration,
            stats=stats,
            image_size=config.image_size,
            min_correspondences=config.min_correspondences,
            frame_id=frame.frame_id,
        )
        assert sample is not None, frame.frame_id
        return sample

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for index, sample in enumerate(
            tqdm(
                pool.map(rebuild, train),
                total=len(train),
                desc="train write",
                disable=not progress_enabled(),
            )
        ):
            write_sample(out, "train", index, sample)

    manifest = DatasetManifest(
        rig_id=rig.rig_id,
        rig=rig.to_text(),
        counts=config.counts,
        decalibration=ranges,
        seed=seed,
        image_size=config.image_size,
        image_stats=StatsRecord.of(stats),
        min_correspondences=config.min_correspondences,
    )
    write_manifest(out, manifest)
    logger.info(f"Wrote dataset to {out}")
    return manifest
