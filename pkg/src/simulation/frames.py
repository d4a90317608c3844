"""Frame synthesis and the on-disk frame layout.

A frames directory contains::

    rig.txt              ground-truth rig in the geometry text format
    images/{id}.ppm      binary PPM (P6) renders
    scenes.jsonl         one SceneRecord per line
    detections.jsonl     one DetectionsRecord per line
"""

from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from src.config.logging import logger
from src.exceptions import IoFailure
from src.simulation.radar import RadarDetection, RadarModel, simulate_radar
from src.simulation.rendering import render_image
from src.simulation.rig import RigConfig
from src.simulation.scene import Scene, SceneConfig, generate_scene
from src.utils.image_io import write_ppm
from src.utils.rng import STREAM_RADAR, STREAM_SCENE, derive_rng


@dataclass(frozen=True, eq=False)
class Frame:
    """A rendered image with its radar detections."""

    frame_id: str
    scene: Scene
    image: np.ndarray
    detections: list[RadarDetection]


class VehicleRecord(BaseModel):
    """Serialized vehicle."""

    vehicle_id: int
    position: list[float]
    length: float
    width: float
    height: float
    vehicle_class: str
    color: list[int]
    yaw: float
    lane: int


class SceneRecord(BaseModel):
    """Serialized scene."""

    frame_id: str
    vehicles: list[VehicleRecord]


class DetectionRecord(BaseModel):
    """Serialized radar detection."""

    x: list[float]
    is_false_positive: bool
    vehicle_id: int | None


class DetectionsRecord(BaseModel):
    """All detections of a frame."""

    frame_id: str
    detections: list[DetectionRecord]


def simulate_frame(
    frame_id: str,
    scene_cfg: SceneConfig,
    radar_model: RadarModel,
    rig: RigConfig,
    seed: int,
    key: tuple[int, ...],
) -> Frame:
    """Generate, render and measure one frame from its own rng streams.

    Args:
        frame_id: Identifier stored with the frame
        scene_cfg: Traffic parameters
        radar_model: Radar measurement model
        rig: Sensor rig
        seed: Master seed
        key: Stream key of this frame (see :func:`derive_rng`)

    Returns
    -------
        The synthesized frame
    """
    scene = generate_scene(scene_cfg, derive_rng(seed, *key, STREAM_SCENE))
    image = render_image(scene, rig)
    detections = simulate_radar(
        scene, rig, radar_model, derive_rng(seed, *key, STREAM_RADAR)
    )
    return Frame(frame_id, scene, image, detections)


def write_frames(frames: Iterable[Frame], rig: RigConfig, out: Path) -> int:
    """Write frames in the frames-directory layout.

    Returns
    -------
        Number of frames written
    """
    try:
        (out / "images").mkdir(parents=True, exist_ok=True)
        (out / "rig.txt").write_text(rig.to_text(), encoding="utf-8")
        count = 0
        with (
            open(out / "scenes.jsonl", "w", encoding="utf-8") as scenes,
            open(out / "detections.jsonl", "w", encoding="utf-8") as dets,
        ):
            for frame in frames:
                write_ppm(out / "images" / f"{frame.frame_id}.ppm", frame.image)
                scenes.write(_scene_record(frame).model_dump_json() + "\n")
                dets.write(_detections_record(frame).model_dump_json() + "\n")
                count += 1
    except OSError as exc:
        raise IoFailure(f"cannot write frames to {out}: {exc}") from exc
    logger.info(f"Wrote {count} frames to {out}")
    return count


def _scene_record(frame: Frame) -> SceneRecord:
    return SceneRecord(
        frame_id=frame.frame_id,
        vehicles=[
            VehicleRecord(
                vehicle_id=v.vehicle_id,
                position=[float(p) for p in v.position],
                length=v.length,
                width=v.width,
                height=v.height,
                vehicle_class=v.vehicle_class.value,
                color=list(v.color),
                yaw=v.yaw,
                lane=v.lane,
            )
            for v in frame.scene.vehicles
        ],
    )


def _detections_record(frame: Frame) -> DetectionsRecord:
    return DetectionsRecord(
        frame_id=frame.frame_id,
        detections=[
            DetectionRecord(
                x=[float(c) for c in d.x],
                is_false_positive=d.is_false_positive,
                vehicle_id=d.vehicle_id,
            )
            for d in frame.detections
        ],
    )


def read_detections(path: Path) -> dict[str, list[RadarDetection]]:
    """Read ``detections.jsonl`` back into detections keyed by frame id."""
    result: dict[str, list[RadarDetection]] = {}
    try:
        with open(path, encoding="utf-8") as file:
            for line in file:
                if not line.strip():
                    continue
                record = DetectionsRecord.model_validate_json(line)
                result[record.frame_id] = [
                    RadarDetection(
                        x=np.array(d.x),
                        is_false_positive=d.is_false_positive,
                        vehicle_id=d.vehicle_id,
                    )
                    for d in record.detections
                ]
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return result
