"""Evaluation artifacts: CSV tables, SVG histograms and overlay images."""

from collections.abc import Mapping, Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from src.cascade.cascade import CascadeResult  # noqa: E402
from src.config.logging import logger  # noqa: E402
from src.dataset.image import (  # noqa: E402
    ImageStats,
    destandardize_image,
    to_uint8,
)
from src.dataset.sample import Sample  # noqa: E402
from src.evaluation.metrics import (  # noqa: E402
    AXES,
    ErrorTable,
    EvalRecord,
    Stage,
    records_from_frame,
    records_to_frame,
)
from src.evaluation.overlay import render_overlay  # noqa: E402
from src.evaluation.protocols import StaticResult  # noqa: E402
from src.exceptions import IoFailure  # noqa: E402
from src.geometry.camera import CameraIntrinsics  # noqa: E402
from src.utils.image_io import write_ppm  # noqa: E402

SVG_HASH_SALT = "radcam"
HISTOGRAM_RANGE = 12.0
HISTOGRAM_BIN = 0.25


def histogram_edges(
    limit: float = HISTOGRAM_RANGE, width: float = HISTOGRAM_BIN
) -> np.ndarray:
    """Bin edges covering ``[-limit, limit]``."""
    count = int(round(2 * limit / width))
    return np.linspace(-limit, limit, count + 1)


def write_histogram(
    path: Path,
    values: np.ndarray,
    title: str,
    limit: float = HISTOGRAM_RANGE,
    width: float = HISTOGRAM_BIN,
    ylabel: str = "samples",
) -> None:
    """Write one self-contained SVG histogram.

    Values outside the range are clipped into the outermost bins.
    """
    edges = histogram_edges(limit, width)
    clipped = np.clip(np.asarray(values, dtype=np.float64), -limit, limit)
    with plt.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.hist(clipped, bins=edges, color="tab:blue")
        ax.set_xlim(-limit, limit)
        ax.set_xlabel("error [deg]")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        fig.tight_layout()
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as exc:
            raise IoFailure(f"cannot write histogram {path}: {exc}") from exc
        finally:
            plt.close(fig)


def overlay_images(
    samples: Sequence[Sample],
    results: Sequence[CascadeResult],
    intrinsics: CameraIntrinsics,
    stats: ImageStats,
    count: int,
) -> dict[str, np.ndarray]:
    """Initial, coarse and fine overlays of the first ``count`` samples.

    Args:
        samples: Evaluated samples
        results: Their inference results, in the same order
        intrinsics: Native-resolution camera intrinsics
        stats: Statistics the sample images were standardized with
        count: Number of frames to draw

    Returns
    -------
        Images keyed by file stem
    """
    images: dict[str, np.ndarray] = {}
    for sample, result in list(zip(samples, results, strict=True))[:count]:
        height, width = sample.image.shape[:2]
        k = intrinsics.scaled(width, height)
        image = to_uint8(destandardize_image(sample.image, stats))
        stem = sample.frame_id.replace("/", "_")
        for stage, h in (
            (Stage.INITIAL, result.h_init),
            (Stage.COARSE, result.h_coarse),
            (Stage.FINE, result.h_est),
        ):
            images[f"{stem}_{stage.value}"] = render_overlay(
                image, sample.detections, sample.h_gt, h, k
            )
    return images


def emit_report(
    out_dir: Path,
    records: Sequence[EvalRecord],
    table: ErrorTable | None = None,
    overlays: Mapping[str, np.ndarray] | None = None,
    extra: Mapping[str, pd.DataFrame] | None = None,
    limit: float = HISTOGRAM_RANGE,
    width: float = HISTOGRAM_BIN,
) -> list[Path]:
    """Write the report of one evaluation.

    Args:
        out_dir: Report directory, created if missing
        records: Per-sample errors, written to ``errors.csv``
        table: Aggregated errors; computed from ``records`` when omitted
        overlays: Images written as ``overlays/{stem}.ppm``
        extra: Additional tables written as ``{name}.csv``
        limit: Histogram half range in degrees
        width: Histogram bin width in degrees

    Returns
    -------
        Paths of the written files

    Raises
    ------
        IoFailure: If a file cannot be written
    """
    table = table if table is not None else ErrorTable.from_records(records)
    written: list[Path] = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "errors.csv"
        records_to_frame(records).to_csv(
            path, index=False, float_format="%.6f"
        )
        written.append(path)
        for name, frame in (
            ("table", table.to_frame()),
            ("reduction", table.reduction()),
        ):
            path = out_dir / f"{name}.csv"
            frame.to_csv(path, float_format="%.2f")
            written.append(path)
        for name, frame in (extra or {}).items():
            path = out_dir / f"{name}.csv"
            frame.to_csv(path, index=False, float_format="%.6f")
            written.append(path)
        if overlays:
            (out_dir / "overlays").mkdir(exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot write report to {out_dir}: {exc}") from exc

    for stage in Stage:
        values = (
            np.stack([r.at(stage).as_array() for r in records])
            if records
            else np.empty((0, len(AXES)))
        )
        for column, axis in enumerate(AXES):
            path = out_dir / f"hist_{stage.value}_{axis}.svg"
            write_histogram(
                path, values[:, column], f"{stage.value} {axis}", limit, width
            )
            written.append(path)

    for stem, image in (overlays or {}).items():
        path = out_dir / "overlays" / f"{stem}.ppm"
        write_ppm(path, image)
        written.append(path)

    logger.info(f"Wrote {len(written)} report files to {out_dir}")
    return written


def read_errors_csv(path: Path) -> list[EvalRecord]:
    """Parse an ``errors.csv`` written by :func:`emit_report`."""
    try:
        frame = pd.read_csv(
            path, dtype={"sample_id": str}, keep_default_na=False
        )
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return records_from_frame(frame)


def write_static_histograms(
    out_dir: Path,
    static: StaticResult,
    limit: float = HISTOGRAM_RANGE,
    width: float = HISTOGRAM_BIN,
) -> list[Path]:
    """Histograms specific to the static protocol.

    ``static_means_{axis}.svg`` bins the signed fine-stage mean of every
    decalibration. ``static_decal{index}_{axis}.svg`` bins the per-sample
    fine errors of the first decalibration that kept any frame.
    """
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot write report to {out_dir}: {exc}") from exc
    kept = [s for s in static.summaries if s.frames > 0]
    means = np.array([s.signed_mean.as_array() for s in kept]).reshape(
        -1, len(AXES)
    )
    written: list[Path] = []
    for column, axis in enumerate(AXES):
        path = out_dir / f"static_means_{axis}.svg"
        write_histogram(
            path,
            means[:, column],
            f"per-decalibration mean {axis}",
            limit,
            width,
            ylabel="decalibrations",
        )
        written.append(path)
    if not kept:
        logger.warning("No static decalibration kept a frame")
        return written

    index = kept[0].index
    prefix = f"d{index:03d}:"
    values = np.array(
        [
            r.fine.as_array()
            for r in static.records
            if r.sample_id.startswith(prefix)
        ]
    )
    for column, axis in enumerate(AXES):
        path = out_dir / f"static_decal{index:03d}_{axis}.svg"
        write_histogram(
            path,
            values[:, column],
            f"decalibration {index} fine {axis}",
            limit,
            width,
        )
        written.append(path)
    return written
