"""Interchangeable correction stages."""

from collections.abc import Sequence
from typing import Protocol, runtime_checkable

import numpy as np

from src.dataset.sample import Sample
from src.geometry.quaternion import UnitQuaternion
from src.geometry.transforms import correction_between


@runtime_checkable
class CorrectionStage(Protocol):
    """Anything that maps samples to raw ``(n, 4)`` correction quaternions."""

    def predict(self, samples: Sequence[Sample]) -> np.ndarray: ...


class ConstantStage:
    """Predicts the same quaternion for every sample."""

    def __init__(self, q: UnitQuaternion) -> None:
        self.q = q

    def predict(self, samples: Sequence[Sample]) -> np.ndarray:
        return np.tile(self.q.as_array(), (len(samples), 1))


class IdentityStage(ConstantStage):
    """Predicts no correction."""

    def __init__(self) -> None:
        super().__init__(UnitQuaternion.identity())


class OracleStage:
    """Predicts the exact rotation from ``H_init`` to ``H_gt``."""

    def predict(self, samples: Sequence[Sample]) -> np.ndarray:
        rows = [
            correction_between(s.h_init, s.h_gt).as_array() for s in samples
        ]
        return np.array(rows).reshape(-1, 4)


STUBS = {"identity": IdentityStage, "oracle": OracleStage}
