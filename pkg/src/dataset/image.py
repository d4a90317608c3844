"""Image resizing and standardization."""

from dataclasses import dataclass, field

import cv2
import numpy as np

STD_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class ImageStats:
    """Per-channel mean and standard deviation."""

    mean: np.ndarray = field(default_factory=lambda: np.zeros(3))
    std: np.ndarray = field(default_factory=lambda: np.ones(3))

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "mean", np.asarray(self.mean, dtype=np.float64).reshape(3)
        )
        object.__setattr__(
            self,
            "std",
            np.maximum(
                np.asarray(self.std, dtype=np.float64).reshape(3), STD_FLOOR
            ),
        )


class ImageStatsAccumulator:
    """Running per-channel sums over resized images."""

    def __init__(self) -> None:
        self.total = np.zeros(3)
        self.total_sq = np.zeros(3)
        self.count = 0

    def add(self, resized: np.ndarray) -> None:
        """Accumulate one ``(h, w, 3)`` float image."""
        pixels = resized.reshape(-1, 3).astype(np.float64)
        self.total += pixels.sum(axis=0)
        self.total_sq += np.square(pixels).sum(axis=0)
        self.count += len(pixels)

    def finalize(self) -> ImageStats:
        """Return the accumulated statistics."""
        if self.count == 0:
            return ImageStats()
        mean = self.total / self.count
        var = np.maximum(self.total_sq / self.count - np.square(mean), 0.0)
        return ImageStats(mean=mean, std=np.sqrt(var))


def resize_image(image: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bilinear resize to ``size = (width, height)`` as float32."""
    return cv2.resize(
        np.asarray(image, dtype=np.float32),
        size,
        interpolation=cv2.INTER_LINEAR,
    )


def standardize_image(
    image: np.ndarray,
    stats: ImageStats,
    size: tuple[int, int] = (240, 150),
) -> np.ndarray:
    """Resize an 8-bit RGB image and standardize each channel.

    Args:
        image: ``(h, w, 3)`` uint8 image
        stats: Dataset statistics (training split)
        size: Target ``(width, height)``

    Returns
    -------
        ``(height, width, 3)`` float32 image
    """
    resized = resize_image(image, size).astype(np.float64)
    return ((resized - stats.mean) / stats.std).astype(np.float32)


def destandardize_image(image: np.ndarray, stats: ImageStats) -> np.ndarray:
    """Undo the standardization (no resizing)."""
    return (image.astype(np.float64) * stats.std + stats.mean).astype(np.float32)


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Round and clip a float image to uint8."""
    return np.clip(np.rint(image), 0, 255).astype(np.uint8)
