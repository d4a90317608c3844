"""Binary PPM (P6) image files."""

from pathlib import Path

import cv2
import numpy as np

from src.exceptions import IoFailure


def write_ppm(path: Path, image: np.ndarray) -> None:
    """Write an RGB uint8 image as binary PPM.

    Raises
    ------
        IoFailure: If OpenCV cannot write the file
    """
    bgr = cv2.cvtColor(np.ascontiguousarray(image), cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), bgr, [cv2.IMWRITE_PXM_BINARY, 1]):
        raise IoFailure(f"cannot write image {path}")


def read_ppm(path: Path) -> np.ndarray:
    """Read a PPM file as an RGB uint8 image.

    Raises
    ------
        IoFailure: If the file is missing or not an image
    """
    bgr = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if bgr is None:
        raise IoFailure(f"cannot read image {path}")
    return cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)
