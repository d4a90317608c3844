"""Network and loss configuration."""

from enum import Enum

from pydantic import BaseModel, Field, model_validator


class LossKind(str, Enum):
    """Training loss on the raw quaternion output."""

    EUCLIDEAN = "euclidean"
    GEODESIC = "geodesic"


class ModelConfig(BaseModel):
    """Shape of the two-stream correction network."""

    image_size: tuple[int, int] = Field(
        (240, 150), description="Input (width, height) of both streams"
    )
    backbone_channels: list[int] = Field(
        [8, 16, 32],
        description="Channels of the stride-2 rgb backbone blocks",
    )
    mlpconv_layers: int = Field(2, ge=1)
    mlpconv_maps: int = Field(16, ge=1, description="Filter maps per layer")
    mlpconv_kernel: int = Field(5, ge=1, description="Spatial kernel size")
    embed_dim: int = Field(50, ge=1, description="Latent size per stream")
    head: list[int] = Field([512, 256, 4], description="Dense head widths")
    dropout_p: float = Field(0.5, ge=0.0, lt=1.0)
    prelu_init: float = Field(0.25, description="Initial PReLU slope")

    @model_validator(mode="after")
    def check_shapes(self) -> "ModelConfig":
        """Require a 4-output head and a usable backbone."""
        if not self.head or self.head[-1] != 4:
            raise ValueError("head must end in 4 linear outputs")
        if not self.backbone_channels or min(self.backbone_channels) < 1:
            raise ValueError("backbone needs at least one block")
        if self.mlpconv_kernel % 2 == 0:
            raise ValueError("mlpconv kernel must be odd for same padding")
        if min(self.image_size) < 2:
            raise ValueError(f"image size {self.image_size} is too small")
        return self


class LossConfig(BaseModel):
    """Loss selection."""

    kind: LossKind = LossKind.EUCLIDEAN
    alpha: float = Field(
        0.005, ge=0.0, description="Weight of the geodesic length term"
    )
