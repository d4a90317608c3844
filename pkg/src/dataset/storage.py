"""Dataset directory layout, manifest and binary sample codec."""

import io
import json
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from src.config.logging import logger
from src.dataset.image import ImageStats
from src.dataset.radar_matrix import SparseRadarMatrix
from src.dataset.sample import Sample, lint_sample
from src.exceptions import ArtifactVersionMismatch, IoFailure
from src.geometry.quaternion import UnitQuaternion
from src.geometry.transforms import DecalRanges, Decalibration, Extrinsic
from src.simulation.rig import RigConfig

SAMPLE_MAGIC = b"RCAL1"
FORMAT_VERSION = 1
SPLITS = ("train", "val", "test")
ENTRY_DTYPE = np.dtype([("row", "<u2"), ("col", "<u2"), ("inv", "<f4")])
LAYOUT = (
    "samples/{split}/{id:06d}.bin, little-endian: magic 'RCAL1'; "
    "image f32[height][width][3]; u32 n + n*(u16 row, u16 col, f32 inv_depth); "
    "label f32[4] (w,x,y,z); H_gt f32[16]; H_init f32[16] (row-major); "
    "trailer: u32 m + m*f64[3] radar-frame detections; H_gt f64[16]; "
    "H_init f64[16]; phi_dec rotation f64[4] + translation f64[3]; "
    "u16-prefixed utf-8 frame_id; u16-prefixed utf-8 rig_id"
)


class SplitCounts(BaseModel):
    """Number of samples per split."""

    train: int = Field(5000, ge=0)
    val: int = Field(500, ge=0)
    test: int = Field(500, ge=0)

    def get(self, split: str) -> int:
        """Count of a split by name."""
        return int(getattr(self, split))


class StatsRecord(BaseModel):
    """Serialized :class:`ImageStats`."""

    mean: list[float]
    std: list[float]

    def build(self) -> ImageStats:
        """Create the statistics value object."""
        return ImageStats(mean=np.array(self.mean), std=np.array(self.std))

    @classmethod
    def of(cls, stats: ImageStats) -> "StatsRecord":
        """Serialize statistics."""
        return cls(
            mean=[float(v) for v in stats.mean],
            std=[float(v) for v in stats.std],
        )


class DatasetManifest(BaseModel):
    """Contents of ``manifest.json``."""

    version: int = FORMAT_VERSION
    rig_id: str
    rig: str = Field(description="RigConfig in the geometry text format")
    counts: SplitCounts
    decalibration: DecalRanges
    seed: int
    image_size: tuple[int, int] = (240, 150)
    image_stats: StatsRecord
    min_correspondences: int = 10
    layout: str = LAYOUT

    def build_rig(self) -> RigConfig:
        """Parse the stored rig."""
        return RigConfig.from_text(self.rig)


def _pack_string(buffer: io.BytesIO, text: str) -> None:
    raw = text.encode("utf-8")
    buffer.write(np.array([len(raw)], dtype="<u2").tobytes())
    buffer.write(raw)


def encode_sample(sample: Sample) -> bytes:
    """Serialize a sample to the binary layout."""
    buffer = io.BytesIO()
    buffer.write(SAMPLE_MAGIC)
    buffer.write(np.ascontiguousarray(sample.image, dtype="<f4").tobytes())
    matrix = sample.radar_matrix
    entries = np.zeros(len(matrix), dtype=ENTRY_DTYPE)
    entries["row"] = matrix.rows
    entries["col"] = matrix.cols
    entries["inv"] = matrix.inverse_depth
    buffer.write(np.array([len(matrix)], dtype="<u4").tobytes())
    buffer.write(entries.tobytes())
    buffer.write(sample.label.as_array().astype("<f4").tobytes())
    buffer.write(sample.h_gt.matrix.astype("<f4").tobytes())
    buffer.write(sample.h_init.matrix.astype("<f4").tobytes())

    detections = np.asarray(sample.detections, dtype="<f8").reshape(-1, 3)
    buffer.write(np.array([len(detections)], dtype="<u4").tobytes())
    buffer.write(detections.tobytes())
    buffer.write(sample.h_gt.matrix.astype("<f8").tobytes())
    buffer.write(sample.h_init.matrix.astype("<f8").tobytes())
    buffer.write(sample.phi_dec.rotation.as_array().astype("<f8").tobytes())
    buffer.write(sample.phi_dec.translation.astype("<f8").tobytes())
    _pack_string(buffer, sample.frame_id)
    _pack_string(buffer, sample.rig_id)
    return buffer.getvalue()


class _Reader:
    def __init__(self, raw: bytes) -> None:
        self.raw = raw
        self.offset = 0

    def array(self, dtype: str | np.dtype, count: int) -> np.ndarray:
        dtype = np.dtype(dtype)
        end = self.offset + dtype.itemsize * count
        if end > len(self.raw):
            raise ArtifactVersionMismatch("sample file is truncated")
        values = np.frombuffer(self.raw, dtype=dtype, count=count, offset=self.offset)
        self.offset = end
        return values

    def string(self) -> str:
        length = int(self.array("<u2", 1)[0])
        return bytes(self.array("u1", length)).decode("utf-8")


def decode_sample(raw: bytes, image_size: tuple[int, int]) -> Sample:
    """Parse the binary layout written by :func:`encode_sample`.

    Raises
    ------
        ArtifactVersionMismatch: On a bad magic or truncated data
    """
    if raw[: len(SAMPLE_MAGIC)] != SAMPLE_MAGIC:
        raise ArtifactVersionMismatch(
            f"bad sample magic {raw[: len(SAMPLE_MAGIC)]!r}"
        )
    width, height = image_size
    reader = _Reader(raw)
    reader.offset = len(SAMPLE_MAGIC)
    image = reader.array("<f4", height * width * 3).reshape(height, width, 3)
    count = int(reader.array("<u4", 1)[0])
    entries = reader.array(ENTRY_DTYPE, count)
    reader.array("<f4", 4 + 16 + 16)  # f32 copies, superseded by the trailer
    n_detections = int(reader.array("<u4", 1)[0])
    detections = reader.array("<f8", 3 * n_detections).reshape(-1, 3)
    h_gt = Extrinsic.from_matrix(reader.array("<f8", 16).reshape(4, 4))
    h_init = Extrinsic.from_matrix(reader.array("<f8", 16).reshape(4, 4))
    rotation = UnitQuaternion.from_array(reader.array("<f8", 4))
    translation = reader.array("<f8", 3)
    phi_dec = Decalibration(rotation, translation.copy())
    frame_id = reader.string()
    rig_id = reader.string()
    return Sample(
        image=image.astype(np.float32),
        radar_matrix=SparseRadarMatrix(
            width,
            height,
            entries["row"].copy(),
            entries["col"].copy(),
            entries["inv"].copy(),
        ),
        label=phi_dec.label,
        h_gt=h_gt,
        h_init=h_init,
        phi_dec=phi_dec,
        frame_id=frame_id,
        rig_id=rig_id,
        detections=detections.astype(np.float64),
    )


def sample_path(root: Path, split: str, index: int) -> Path:
    """Location of a sample file."""
    return root / "samples" / split / f"{index:06d}.bin"


def write_sample(root: Path, split: str, index: int, sample: Sample) -> None:
    """Write one sample file."""
    path = sample_path(root, split, index)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_sample(sample))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_manifest(root: Path, manifest: DatasetManifest) -> None:
    """Write ``manifest.json``."""
    try:
        root.mkdir(parents=True, exist_ok=True)
        (root / "manifest.json").write_text(
            json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True)
            + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise IoFailure(f"cannot write manifest in {root}: {exc}") from exc


def read_manifest(root: Path) -> DatasetManifest:
    """Read and validate ``manifest.json``.

    Raises
    ------
        ArtifactVersionMismatch: If the manifest is missing, malformed or
            of another format version
    """
    path = root / "manifest.json"
    if not path.exists():
        raise ArtifactVersionMismatch(f"no dataset manifest at {path}")
    try:
        manifest = DatasetManifest.model_validate_json(
            path.read_text(encoding="utf-8")
        )
    except ValidationError as exc:
        raise ArtifactVersionMismatch(f"malformed manifest {path}: {exc}") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if manifest.version != FORMAT_VERSION:
        raise ArtifactVersionMismatch(
            f"dataset format version {manifest.version}, expected "
            f"{FORMAT_VERSION}"
        )
    return manifest


def load_split(root: Path, split: str) -> list[Sample]:
    """Load every sample of a split, in index order."""
    manifest = read_manifest(root)
    samples = []
    for index in range(manifest.counts.get(split)):
        path = sample_path(root, split, index)
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise ArtifactVersionMismatch(f"missing sample {path}") from exc
        samples.append(decode_sample(raw, manifest.image_size))
    logger.debug(f"Loaded {len(samples)} {split} samples from {root}")
    return samples


def lint_dataset(root: Path) -> list[str]:
    """Check manifest counts and every Sample invariant.

    Returns
    -------
        Human-readable problems; empty when the dataset is valid
    """
    manifest = read_manifest(root)
    rig = manifest.build_rig()
    problems: list[str] = []
    frames: dict[str, set[str]] = {}
    for split in SPLITS:
        on_disk = sorted((root / "samples" / split).glob("*.bin"))
        expected = manifest.counts.get(split)
        if len(on_disk) != expected:
            problems.append(
                f"{split}: manifest says {expected} samples, found {len(on_disk)}"
            )
        frames[split] = set()
        for index in range(min(expected, len(on_disk))):
            raw = sample_path(root, split, index).read_bytes()
            sample = decode_sample(raw, manifest.image_size)
            frames[split].add(sample.frame_id)
            for problem in lint_sample(
                sample, rig, manifest.min_correspondences
            ):
                problems.append(f"{split}/{index:06d}: {problem}")
    for first, second in (("train", "val"), ("train", "test"), ("val", "test")):
        shared = frames[first] & frames[second]
        if shared:
            problems.append(f"{first} and {second} share {len(shared)} frames")
    return problems
