"""Unit quaternions and tilt/pan/roll angles.

Conventions
-----------
- Storage order is ``(w, x, y, z)``, Hamilton product.
- The canonical representative of ``{q, -q}`` has ``w >= 0``; when
  ``w == 0`` the first nonzero of ``x, y, z`` is made positive.
- Camera axes are x-right, y-down, z-forward. Tilt rotates about x, pan
  about y and roll about z (the optical axis); the composed rotation is
  ``R = Rz(roll) @ Ry(pan) @ Rx(tilt)``. Pan is the middle angle of this
  sequence and is therefore the one that locks at +-90 degrees.
- Angles crossing the public API are in degrees.
"""

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from src.exceptions import DegenerateNorm, EmptyInput, GimbalLock

NORM_TOL = 1e-9
GIMBAL_TOL = 1e-9


@dataclass(frozen=True)
class UnitQuaternion:
    """Rotation stored as a normalized quaternion ``(w, x, y, z)``."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        norm = math.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2)
        if not math.isfinite(norm) or norm <= 1e-12:
            raise DegenerateNorm(f"quaternion norm {norm} is not usable")
        for name in ("w", "x", "y", "z"):
            object.__setattr__(self, name, float(getattr(self, name) / norm))

    @classmethod
    def identity(cls) -> "UnitQuaternion":
        """Return the identity rotation."""
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, values: Sequence[float] | np.ndarray) -> "UnitQuaternion":
        """Build a quaternion from four raw components, normalizing them.

        Raises
        ------
            DegenerateNorm: If the vector has (almost) zero length
        """
        w, x, y, z = (float(v) for v in np.asarray(values).reshape(4))
        return cls(w, x, y, z)

    @classmethod
    def from_matrix(cls, rotation: np.ndarray) -> "UnitQuaternion":
        """Convert a 3x3 rotation matrix (Shepperd's method)."""
        m = np.asarray(rotation, dtype=np.float64)
        trace = m[0, 0] + m[1, 1] + m[2, 2]
        if trace > 0.0:
            s = 2.0 * math.sqrt(1.0 + trace)
            w = 0.25 * s
            x = (m[2, 1] - m[1, 2]) / s
            y = (m[0, 2] - m[2, 0]) / s
            z = (m[1, 0] - m[0, 1]) / s
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = 2.0 * math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
            w = (m[2, 1] - m[1, 2]) / s
            x = 0.25 * s
            y = (m[0, 1] + m[1, 0]) / s
            z = (m[0, 2] + m[2, 0]) / s
        elif m[1, 1] > m[2, 2]:
            s = 2.0 * math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
            w = (m[0, 2] - m[2, 0]) / s
            x = (m[0, 1] + m[1, 0]) / s
            y = 0.25 * s
            z = (m[1, 2] + m[2, 1]) / s
        else:
            s = 2.0 * math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
            w = (m[1, 0] - m[0, 1]) / s
            x = (m[0, 2] + m[2, 0]) / s
            y = (m[1, 2] + m[2, 1]) / s
            z = 0.25 * s
        return quat_canonicalize(cls(w, x, y, z))

    def as_array(self) -> np.ndarray:
        """Return ``[w, x, y, z]`` as a float64 array."""
        return np.array([self.w, self.x, self.y, self.z], dtype=np.float64)

    def to_matrix(self) -> np.ndarray:
        """Return the equivalent 3x3 rotation matrix."""
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [
                    1 - 2 * (y * y + z * z),
                    2 * (x * y - w * z),
                    2 * (x * z + w * y),
                ],
                [
                    2 * (x * y + w * z),
                    1 - 2 * (x * x + z * z),
                    2 * (y * z - w * x),
                ],
                [
                    2 * (x * z - w * y),
                    2 * (y * z + w * x),
                    1 - 2 * (x * x + y * y),
                ],
            ],
            dtype=np.float64,
        )

    def __neg__(self) -> "UnitQuaternion":
        return UnitQuaternion(-self.w, -self.x, -self.y, -self.z)

    def __mul__(self, other: "UnitQuaternion") -> "UnitQuaternion":
        return quat_mul(self, other)


@dataclass(frozen=True)
class EulerTPR:
    """Tilt, pan and roll angles in degrees."""

    tilt: float
    pan: float
    roll: float

    def as_array(self) -> np.ndarray:
        """Return ``[tilt, pan, roll]``."""
        return np.array([self.tilt, self.pan, self.roll], dtype=np.float64)


def _axis_quaternion(axis: int, angle_deg: float) -> UnitQuaternion:
    half = math.radians(angle_deg) / 2.0
    components = [math.cos(half), 0.0, 0.0, 0.0]
    components[axis + 1] = math.sin(half)
    return UnitQuaternion(*components)


def quat_mul(a: UnitQuaternion, b: UnitQuaternion) -> UnitQuaternion:
    """Hamilton product ``a * b`` (apply ``b`` first, then ``a``)."""
    return UnitQuaternion(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    )


def quat_invert(q: UnitQuaternion) -> UnitQuaternion:
    """Inverse rotation (the conjugate for unit quaternions)."""
    return UnitQuaternion(q.w, -q.x, -q.y, -q.z)


def quat_canonicalize(q: UnitQuaternion) -> UnitQuaternion:
    """Pick the representative of ``{q, -q}`` with ``w >= 0``."""
    if q.w > 0.0:
        return q
    if q.w < 0.0:
        return -q
    for component in (q.x, q.y, q.z):
        if component != 0.0:
            return q if component > 0.0 else -q
    return q


def quat_from_euler(e: EulerTPR) -> UnitQuaternion:
    """Encode ``Rz(roll) @ Ry(pan) @ Rx(tilt)`` as a canonical quaternion.

    Args:
        e: Angles in degrees

    Returns
    -------
        The canonical unit quaternion
    """
    q = quat_mul(
        _axis_quaternion(2, e.roll),
        quat_mul(_axis_quaternion(1, e.pan), _axis_quaternion(0, e.tilt)),
    )
    return quat_canonicalize(q)


def quat_to_euler(q: UnitQuaternion) -> EulerTPR:
    """Decompose a rotation into tilt, pan and roll.

    Args:
        q: The rotation

    Returns
    -------
        Angles in degrees with pan in [-90, 90]

    Raises
    ------
        GimbalLock: If ``|R[2, 0]| > 1 - 1e-9``
    """
    m = q.to_matrix()
    sin_pan = -m[2, 0]
    if abs(sin_pan) > 1.0 - GIMBAL_TOL:
        raise GimbalLock(
            f"pan is at gimbal lock (|R31| = {abs(sin_pan):.12f})"
        )
    tilt = math.atan2(m[2, 1], m[2, 2])
    pan = math.asin(sin_pan)
    roll = math.atan2(m[1, 0], m[0, 0])
    return EulerTPR(math.degrees(tilt), math.degrees(pan), math.degrees(roll))


def geodesic_angle(a: UnitQuaternion, b: UnitQuaternion) -> float:
    """Rotation angle between two orientations in degrees, in [0, 180]."""
    d = quat_mul(quat_invert(a), b)
    vector_norm = math.sqrt(d.x * d.x + d.y * d.y + d.z * d.z)
    return math.degrees(2.0 * math.atan2(vector_norm, abs(d.w)))


def quat_mean(qs: Sequence[UnitQuaternion]) -> UnitQuaternion:
    """Average nearby rotations.

    Every element is sign-aligned to the first one, the components are
    averaged arithmetically and the result is renormalized. This matches
    the chordal L2 mean for rotations within 90 degrees of each other.

    Args:
        qs: Rotations to average

    Returns
    -------
        The canonical mean rotation

    Raises
    ------
        EmptyInput: If ``qs`` is empty
    """
    if len(qs) == 0:
        raise EmptyInput("quat_mean needs at least one quaternion")
    stacked = np.stack([q.as_array() for q in qs])
    reference = stacked[0]
    signs = np.where(stacked @ reference < 0.0, -1.0, 1.0)
    mean = (stacked * signs[:, None]).mean(axis=0)
    return quat_canonicalize(UnitQuaternion.from_array(mean))


def quats_to_array(qs: Sequence[UnitQuaternion]) -> np.ndarray:
    """Stack quaternions into an ``(n, 4)`` float64 array."""
    if len(qs) == 0:
        return np.zeros((0, 4), dtype=np.float64)
    return np.stack([q.as_array() for q in qs])
