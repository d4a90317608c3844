"""Per-axis rotation errors and their aggregation."""

from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
import pandas as pd

from src.geometry.quaternion import (
    UnitQuaternion,
    geodesic_angle,
    quat_to_euler,
)
from src.geometry.transforms import Extrinsic

AXES = ("tilt", "pan", "roll", "total")
ERROR_COLUMNS = ["sample_id", "stage"] + [f"{axis}_err" for axis in AXES]
DECIMALS = 6


class Stage(str, Enum):
    """Calibration state an error is measured at."""

    INITIAL = "initial"
    COARSE = "coarse"
    FINE = "fine"


@dataclass(frozen=True)
class AxisErrors:
    """Residual angles in degrees.

    ``tilt``, ``pan`` and ``roll`` keep the sign of the residual rotation's
    Euler angles; ``total`` is its rotation angle and never negative.
    """

    tilt: float
    pan: float
    roll: float
    total: float

    def as_array(self) -> np.ndarray:
        return np.array([self.tilt, self.pan, self.roll, self.total])

    def absolute(self) -> "AxisErrors":
        return AxisErrors(abs(self.tilt), abs(self.pan), abs(self.roll), self.total)

    def rounded(self, decimals: int = DECIMALS) -> "AxisErrors":
        return AxisErrors(*(round(float(v), decimals) for v in self.as_array()))


def axis_errors(
    h_est: Extrinsic, h_gt: Extrinsic, signed: bool = False
) -> AxisErrors:
    """Errors of an estimated extrinsic against the ground truth.

    The residual rotation is ``R_est @ R_gt^T``. Its tilt, pan and roll
    depend on the Euler convention; the total angle does not.

    Args:
        h_est: Estimated extrinsic
        h_gt: Ground-truth extrinsic
        signed: Keep the sign of the per-axis angles

    Returns
    -------
        Errors in degrees

    Raises
    ------
        GimbalLock: If the residual is at the Euler singularity
    """
    residual = UnitQuaternion.from_matrix(h_est.R @ h_gt.R.T)
    euler = quat_to_euler(residual)
    total = geodesic_angle(residual, UnitQuaternion.identity())
    errors = AxisErrors(euler.tilt, euler.pan, euler.roll, total)
    return errors if signed else errors.absolute()


@dataclass(frozen=True)
class EvalRecord:
    """Signed errors of one sample before and after each stage."""

    sample_id: str
    initial: AxisErrors
    coarse: AxisErrors
    fine: AxisErrors

    @classmethod
    def measure(
        cls,
        sample_id: str,
        h_gt: Extrinsic,
        h_init: Extrinsic,
        h_coarse: Extrinsic,
        h_fine: Extrinsic,
    ) -> "EvalRecord":
        """Measure all three stages, rounded as they are stored."""
        return cls(
            sample_id,
            *(
                axis_errors(h, h_gt, signed=True).rounded()
                for h in (h_init, h_coarse, h_fine)
            ),
        )

    def at(self, stage: Stage) -> AxisErrors:
        return getattr(self, stage.value)


@dataclass(frozen=True)
class ErrorTable:
    """Mean absolute errors per stage, indexed by stage then axis."""

    rows: dict[Stage, AxisErrors]
    count: int

    @classmethod
    def from_records(cls, records: Sequence[EvalRecord]) -> "ErrorTable":
        """Average absolute errors over the same records for every stage."""
        rows = {}
        for stage in Stage:
            if records:
                values = np.abs(
                    np.stack([r.at(stage).as_array() for r in records])
                ).mean(axis=0)
            else:
                values = np.full(4, np.nan)
            rows[stage] = AxisErrors(*(float(v) for v in values))
        return cls(rows, len(records))

    def to_frame(self) -> pd.DataFrame:
        """Rows Initial/Coarse/Fine, columns Tilt/Pan/Roll/Total."""
        return pd.DataFrame(
            [self.rows[stage].as_array() for stage in Stage],
            index=pd.Index([s.value.capitalize() for s in Stage], name="stage"),
            columns=[axis.capitalize() for axis in AXES],
        )

    def reduction(self) -> pd.DataFrame:
        """Percentage reduction of each stage relative to the initial row."""
        initial = self.rows[Stage.INITIAL].as_array()
        rows = []
        for stage in (Stage.COARSE, Stage.FINE):
            with np.errstate(divide="ignore", invalid="ignore"):
                reduction = 100.0 * (1.0 - self.rows[stage].as_array() / initial)
            rows.append(reduction)
        return pd.DataFrame(
            rows,
            index=pd.Index(["Coarse", "Fine"], name="stage"),
            columns=[axis.capitalize() for axis in AXES],
        )

    def format(self) -> str:
        """Fixed-width table for logs."""
        return self.to_frame().to_string(float_format=lambda v: f"{v:.2f}")


def records_to_frame(records: Sequence[EvalRecord]) -> pd.DataFrame:
    """Long format with one row per sample and stage."""
    rows = []
    for record in records:
        for stage in Stage:
            errors = record.at(stage)
            rows.append(
                [record.sample_id, stage.value, *errors.as_array().tolist()]
            )
    return pd.DataFrame(rows, columns=ERROR_COLUMNS)


def records_from_frame(frame: pd.DataFrame) -> list[EvalRecord]:
    """Inverse of :func:`records_to_frame`."""
    grouped: dict[str, dict[str, AxisErrors]] = {}
    for row in frame.itertuples(index=False):
        errors = AxisErrors(
            float(row.tilt_err),
            float(row.pan_err),
            float(row.roll_err),
            float(row.total_err),
        )
        grouped.setdefault(str(row.sample_id), {})[str(row.stage)] = errors
    return [
        EvalRecord(
            sample_id,
            stages[Stage.INITIAL.value],
            stages[Stage.COARSE.value],
            stages[Stage.FINE.value],
        )
        for sample_id, stages in grouped.items()
    ]
