"""Evaluation protocols: random, static, temporal and generalization."""

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Annotated, TypeVar

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from tqdm import tqdm

from src.cascade.cascade import CascadeModel, CascadeResult, infer_batch
from src.cascade.cascade import temporal_refine
from src.config.logging import logger, progress_enabled
from src.dataset.sample import MIN_CORRESPONDENCES, Sample, redecalibrate
from src.evaluation.metrics import (
    AXES,
    AxisErrors,
    ErrorTable,
    EvalRecord,
    Stage,
    axis_errors,
)
from src.exceptions import ConfigInvalid, WindowTooLarge
from src.geometry.camera import CameraIntrinsics
from src.geometry.quaternion import EulerTPR, quat_to_euler
from src.geometry.transforms import (
    DecalRanges,
    Decalibration,
    sample_decalibration,
)
from src.utils.rng import STREAM_EVALUATION, derive_rng

T = TypeVar("T")
CHUNK = 32


class EvalConfig(BaseModel):
    """Protocol parameters."""

    n_decals: int = Field(100, ge=1, description="Static decalibrations")
    windows: list[Annotated[int, Field(ge=1)]] = Field(
        [1, 5, 25], description="Temporal window sizes (frames)"
    )
    overlay_count: int = Field(3, ge=0, description="Frames with overlays")
    histogram_range: float = Field(12.0, gt=0.0, description="Degrees")
    histogram_bin: float = Field(0.25, gt=0.0, description="Degrees")
    fine_iterations: int = Field(1, ge=1)


def _chunked_map(
    fn: Callable[[Sequence[Sample]], list[T]],
    samples: Sequence[Sample],
    threads: int,
    desc: str,
) -> list[T]:
    """Apply ``fn`` to chunks in parallel, keeping sample order."""
    chunks = [samples[i : i + CHUNK] for i in range(0, len(samples), CHUNK)]
    results: list[T] = []
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for part in tqdm(
            pool.map(fn, chunks),
            total=len(chunks),
            desc=desc,
            disable=not progress_enabled(),
        ):
            results.extend(part)
    return results


def _records(
    samples: Sequence[Sample],
    results: Sequence[CascadeResult],
    prefix: str = "",
) -> list[EvalRecord]:
    return [
        EvalRecord.measure(
            f"{prefix}{sample.frame_id}",
            sample.h_gt,
            sample.h_init,
            result.h_coarse,
            result.h_est,
        )
        for sample, result in zip(samples, results, strict=True)
    ]


@dataclass(frozen=True, eq=False)
class RandomResult:
    """Outcome of the random-decalibration protocol."""

    table: ErrorTable
    records: list[EvalRecord]
    results: list[CascadeResult]


def eval_random(
    cascade: CascadeModel,
    samples: Sequence[Sample],
    intrinsics: CameraIntrinsics,
    fine_iterations: int = 1,
    threads: int = 1,
) -> RandomResult:
    """Evaluate every test sample under its own stored decalibration.

    Args:
        cascade: Stages to evaluate
        samples: Test split with raw detections
        intrinsics: Camera model for the reprojection
        fine_iterations: Applications of the fine stage
        threads: Worker threads

    Returns
    -------
        Error table, per-sample records and the raw inference results
    """

    def run(chunk: Sequence[Sample]) -> list[CascadeResult]:
        return infer_batch(cascade, chunk, intrinsics, fine_iterations)

    results = _chunked_map(run, samples, threads, "random")
    records = _records(samples, results)
    table = ErrorTable.from_records(records)
    logger.info(
        f"Random protocol over {len(records)} samples:\n{table.format()}"
    )
    return RandomResult(table, records, results)


def static_decalibrations(
    ranges: DecalRanges, n_decals: int, seed: int
) -> list[Decalibration]:
    """Draw the fixed decalibration list of the static protocol."""
    rng = derive_rng(seed, STREAM_EVALUATION, 0)
    return [sample_decalibration(ranges, rng) for _ in range(n_decals)]


@dataclass(frozen=True)
class DecalSummary:
    """Errors of all frames under one static decalibration."""

    index: int
    angles: EulerTPR
    frames: int
    table: ErrorTable
    signed_mean: AxisErrors


@dataclass(frozen=True, eq=False)
class StaticResult:
    """Outcome of the static-decalibration protocol."""

    summaries: list[DecalSummary]
    records: list[EvalRecord] = field(default_factory=list)

    def per_decal_std(self, stage: Stage = Stage.FINE) -> float:
        """Spread of the per-decalibration mean total errors."""
        means = [
            s.table.rows[stage].total for s in self.summaries if s.frames > 0
        ]
        return float(np.std(means)) if means else float("nan")

    def per_sample_std(self, stage: Stage = Stage.FINE) -> float:
        """Spread of the per-sample total errors over all decalibrations."""
        totals = [r.at(stage).total for r in self.records]
        return float(np.std(totals)) if totals else float("nan")

    def to_frame(self) -> pd.DataFrame:
        """One row per decalibration."""
        rows = []
        for s in self.summaries:
            row = {
                "decal": s.index,
                "decal_tilt": s.angles.tilt,
                "decal_pan": s.angles.pan,
                "decal_roll": s.angles.roll,
                "frames": s.frames,
            }
            for stage in Stage:
                for axis, value in zip(
                    AXES, s.table.rows[stage].as_array(), strict=True
                ):
                    row[f"{stage.value}_{axis}"] = value
            signed = s.signed_mean.as_array()
            for axis, value in zip(AXES, signed, strict=True):
                row[f"fine_signed_{axis}"] = value
            rows.append(row)
        return pd.DataFrame(rows)


def eval_static(
    cascade: CascadeModel,
    samples: Sequence[Sample],
    intrinsics: CameraIntrinsics,
    decalibrations: Sequence[Decalibration],
    min_correspondences: int = MIN_CORRESPONDENCES,
    fine_iterations: int = 1,
    threads: int = 1,
) -> StaticResult:
    """Apply each decalibration to all frames and average per decalibration.

    Frames that fall below the correspondence filter under a decalibration
    are left out of that decalibration's means and counted in ``frames``.

    Args:
        cascade: Stages to evaluate
        samples: Test frames; their stored decalibrations are replaced
        intrinsics: Camera model for the reprojection
        decalibrations: Static decalibrations to evaluate
        min_correspondences: Filter threshold
        fine_iterations: Applications of the fine stage
        threads: Worker threads

    Returns
    -------
        Per-decalibration summaries and all per-sample records
    """

    def run(chunk: Sequence[Sample]) -> list[CascadeResult]:
        return infer_batch(cascade, chunk, intrinsics, fine_iterations)

    summaries: list[DecalSummary] = []
    records: list[EvalRecord] = []
    for index, d in enumerate(decalibrations):
        redone = (
            redecalibrate(s, intrinsics, d, min_correspondences)
            for s in samples
        )
        kept = [s for s in redone if s is not None]
        results = _chunked_map(run, kept, threads, f"static {index}")
        decal_records = _records(kept, results, prefix=f"d{index:03d}:")
        signed = (
            np.mean(
                [r.fine.as_array() for r in decal_records], axis=0
            ).tolist()
            if decal_records
            else [float("nan")] * 4
        )
        summaries.append(
            DecalSummary(
                index=index,
                angles=quat_to_euler(d.rotation),
                frames=len(kept),
                table=ErrorTable.from_records(decal_records),
                signed_mean=AxisErrors(*signed),
            )
        )
        records.extend(decal_records)
        if not kept:
            logger.warning(f"Static decalibration {index} filtered every frame")
    result = StaticResult(summaries, records)
    logger.info(
        f"Static protocol: {len(summaries)} decalibrations, fine total std "
        f"per decalibration {result.per_decal_std():.3f} deg, per sample "
        f"{result.per_sample_std():.3f} deg"
    )
    return result


@dataclass(frozen=True)
class TemporalRow:
    """Mean absolute errors of all windows of one size."""

    window: int
    windows: int
    errors: AxisErrors


@dataclass(frozen=True, eq=False)
class TemporalResult:
    """Window-size curve plus the single-frame records behind it."""

    rows: list[TemporalRow]
    records: list[EvalRecord]

    def to_frame(self) -> pd.DataFrame:
        """One row per window size."""
        return pd.DataFrame(
            [[r.window, r.windows, *r.errors.as_array()] for r in self.rows],
            columns=["window", "windows", *AXES],
        )


def temporal_decalibration(ranges: DecalRanges, seed: int) -> Decalibration:
    """Draw the static decalibration shared by a temporal sequence."""
    return sample_decalibration(
        ranges, derive_rng(seed, STREAM_EVALUATION, 1)
    )


def eval_temporal(
    cascade: CascadeModel,
    samples: Sequence[Sample],
    intrinsics: CameraIntrinsics,
    decalibration: Decalibration,
    windows: Sequence[int],
    min_correspondences: int = MIN_CORRESPONDENCES,
    fine_iterations: int = 1,
    threads: int = 1,
) -> TemporalResult:
    """Error of temporally averaged corrections versus window size.

    All frames share one static decalibration. For each window size every
    sliding window of consecutive frames averages its corrections with
    :func:`temporal_refine` and is scored against the first frame's
    ground truth.

    Raises
    ------
        ConfigInvalid: If a window size is below one
        WindowTooLarge: If a window exceeds the number of usable frames
    """
    if any(w < 1 for w in windows):
        raise ConfigInvalid(f"window sizes must be >= 1, got {list(windows)}")
    redone = (
        redecalibrate(s, intrinsics, decalibration, min_correspondences)
        for s in samples
    )
    frames = [s for s in redone if s is not None]
    if windows and max(windows) > len(frames):
        raise WindowTooLarge(
            f"window {max(windows)} exceeds the {len(frames)} usable frames"
        )

    def run(chunk: Sequence[Sample]) -> list[CascadeResult]:
        return infer_batch(cascade, chunk, intrinsics, fine_iterations)

    results = _chunked_map(run, frames, threads, "temporal")
    corrections = [(r.q_coarse, r.q_fine) for r in results]
    rows = []
    for window in windows:
        errors = np.stack(
            [
                axis_errors(
                    temporal_refine(
                        corrections[start : start + window],
                        frames[start].h_init,
                    ),
                    frames[start].h_gt,
                ).as_array()
                for start in range(len(frames) - window + 1)
            ]
        )
        mean = AxisErrors(*(float(v) for v in errors.mean(axis=0)))
        rows.append(TemporalRow(window, len(errors), mean))
        logger.info(
            f"Temporal window {window}: mean total error {mean.total:.3f} deg "
            f"over {len(errors)} windows"
        )
    return TemporalResult(rows, _records(frames, results))


@dataclass(frozen=True, eq=False)
class GeneralizationResult:
    """Same cascade evaluated on the training rig and on another rig."""

    primary: RandomResult
    secondary: RandomResult

    def degradation(self) -> pd.DataFrame:
        """Secondary minus primary mean absolute errors."""
        return self.secondary.table.to_frame() - self.primary.table.to_frame()


def eval_generalization(
    cascade: CascadeModel,
    primary: Sequence[Sample],
    primary_intrinsics: CameraIntrinsics,
    secondary: Sequence[Sample],
    secondary_intrinsics: CameraIntrinsics,
    fine_iterations: int = 1,
    threads: int = 1,
) -> GeneralizationResult:
    """Evaluate without retraining on the primary and the secondary rig."""
    first = eval_random(
        cascade, primary, primary_intrinsics, fine_iterations, threads
    )
    second = eval_random(
        cascade, secondary, secondary_intrinsics, fine_iterations, threads
    )
    result = GeneralizationResult(first, second)
    logger.info(
        "Generalization degradation (secondary - primary):\n"
        + result.degradation().to_string(float_format=lambda v: f"{v:.2f}")
    )
    return result
