"""Two-stream correction network.

The rgb stream runs a stride-2 convolutional backbone followed by MlpConv
layers (a same-padded convolution and two 1x1 convolutions each) and a
dense embedding. The radar stream max-pools the inverse-depth matrix and
embeds it without convolutions so its sparse entries are kept. Both
embeddings are concatenated and regressed to a raw quaternion by a dense
head with a linear output.
"""

from collections.abc import Sequence

import numpy as np

from src.calibnet.config import ModelConfig
from src.config.logging import logger
from src.dataset.radar_matrix import SparseRadarMatrix
from src.dataset.sample import Sample
from src.exceptions import ArtifactVersionMismatch, ConfigInvalid, ShapeMismatch
from src.nn import functional as F
from src.nn.init import orthogonal_init
from src.nn.tensor import Tensor, no_grad

KERNEL = 3
STRIDE = 2


def _halved(size: int) -> int:
    return F.conv_output_size(size, KERNEL, STRIDE, 1)


def feature_size(config: ModelConfig) -> tuple[int, int]:
    """Spatial ``(height, width)`` of the backbone output."""
    width, height = config.image_size
    for _ in config.backbone_channels:
        height, width = _halved(height), _halved(width)
    return height, width


def radar_pooled_size(config: ModelConfig) -> int:
    """Length of the flattened, pooled radar matrix."""
    width, height = config.image_size
    return ((height + 1) // 2) * ((width + 1) // 2)


class CalibNet:
    """Parameters and forward pass of the correction network."""

    def __init__(self, config: ModelConfig, params: dict[str, Tensor]) -> None:
        self.config = config
        self.params = params

    def parameters(self) -> list[Tensor]:
        """Trainable tensors in a stable order."""
        return list(self.params.values())

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        """Copies of all parameter values."""
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        """Replace parameter values by name.

        Raises
        ------
            ArtifactVersionMismatch: If names or shapes differ
        """
        if set(state) != set(self.params):
            missing = sorted(set(self.params) ^ set(state))
            raise ArtifactVersionMismatch(
                f"checkpoint parameters differ from the model: {missing[:5]}"
            )
        for name, param in self.params.items():
            value = np.asarray(state[name])
            if value.shape != param.shape:
                raise ArtifactVersionMismatch(
                    f"{name}: checkpoint shape {value.shape}, model "
                    f"{param.shape}"
                )
            param.data = value.astype(param.data.dtype, copy=True)

    def _conv(
        self, x: Tensor, name: str, stride: int = 1, padding: int = 0
    ) -> Tensor:
        p = self.params
        x = F.conv2d(x, p[f"{name}.weight"], p[f"{name}.bias"], stride, padding)
        return F.prelu(x, p[f"{name}.slope"])

    def _depthwise(self, x: Tensor, name: str) -> Tensor:
        p = self.params
        x = F.depthwise_conv2d(
            x, p[f"{name}.weight"], p[f"{name}.bias"], STRIDE, 1
        )
        return F.prelu(x, p[f"{name}.slope"])

    def _dense(self, x: Tensor, name: str, activate: bool = True) -> Tensor:
        p = self.params
        x = F.dense(x, p[f"{name}.weight"], p[f"{name}.bias"])
        return F.prelu(x, p[f"{name}.slope"]) if activate else x

    def forward(
        self,
        images: np.ndarray,
        radar: np.ndarray,
        training: bool = False,
        rng: np.random.Generator | None = None,
    ) -> Tensor:
        """Regress raw correction quaternions.

        Args:
            images: ``(n, height, width, 3)`` standardized images
            radar: ``(n, height, width)`` dense inverse-depth matrices
            training: Enables dropout
            rng: Dropout random generator (training only)

        Returns
        -------
            ``(n, 4)`` unnormalized quaternions

        Raises
        ------
            ShapeMismatch: If the inputs do not match the configuration
        """
        width, height = self.config.image_size
        n = len(images)
        if images.shape != (n, height, width, 3):
            raise ShapeMismatch(
                f"images {images.shape}, expected (n, {height}, {width}, 3)"
            )
        if radar.shape != (n, height, width):
            raise ShapeMismatch(
                f"radar {radar.shape}, expected (n, {height}, {width})"
            )
        x = Tensor(images.transpose(0, 3, 1, 2))
        x = self._conv(x, "backbone.0", stride=STRIDE, padding=1)
        for k in range(1, len(self.config.backbone_channels)):
            x = self._depthwise(x, f"backbone.{k}.depthwise")
            x = self._conv(x, f"backbone.{k}.pointwise")
        pad = self.config.mlpconv_kernel // 2
        for layer in range(self.config.mlpconv_layers):
            x = self._conv(x, f"mlpconv.{layer}.spatial", padding=pad)
            x = self._conv(x, f"mlpconv.{layer}.cccp1")
            x = self._conv(x, f"mlpconv.{layer}.cccp2")
        rgb = self._dense(F.flatten(x), "rgb.embed")

        r = F.maxpool2x2(Tensor(radar[:, None]))
        radar_embedding = self._dense(F.flatten(r), "radar.embed")

        h = F.concat([rgb, radar_embedding], axis=1)
        last = len(self.config.head) - 1
        for k in range(last):
            h = self._dense(h, f"head.{k}")
            if k == 0:
                h = F.dropout(h, self.config.dropout_p, rng, training)
        return self._dense(h, f"head.{last}", activate=False)

    __call__ = forward

    def predict(
        self, samples: Sequence[Sample], batch_size: int = 32
    ) -> np.ndarray:
        """Inference-mode raw outputs ``(n, 4)`` for samples."""
        outputs = [np.zeros((0, 4))]
        with no_grad():
            for start in range(0, len(samples), batch_size):
                images, radar = batch_inputs(samples[start : start + batch_size])
                outputs.append(self.forward(images, radar).data)
        return np.concatenate(outputs).astype(np.float64)


def batch_inputs(samples: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack sample images and densified radar matrices."""
    images = np.stack([s.image for s in samples])
    radar = np.stack([s.radar_matrix.to_dense() for s in samples])
    return images, radar


def forward(
    model: CalibNet, image: np.ndarray, radar_matrix: SparseRadarMatrix
) -> np.ndarray:
    """Raw 4-vector for a single image and radar matrix."""
    with no_grad():
        out = model.forward(image[None], radar_matrix.to_dense()[None])
    return out.data[0].astype(np.float64)


def _add_conv(
    params: dict[str, Tensor],
    name: str,
    shape: tuple[int, int, int, int],
    config: ModelConfig,
    rng: np.random.Generator,
) -> None:
    params[f"{name}.weight"] = orthogonal_init(shape, 1.0, rng)
    params[f"{name}.bias"] = Tensor(np.zeros(shape[0]), requires_grad=True)
    params[f"{name}.slope"] = Tensor([config.prelu_init], requires_grad=True)


def _add_dense(
    params: dict[str, Tensor],
    name: str,
    out_features: int,
    in_features: int,
    rng: np.random.Generator,
    config: ModelConfig | None = None,
) -> None:
    params[f"{name}.weight"] = orthogonal_init(
        (out_features, in_features), 1.0, rng
    )
    params[f"{name}.bias"] = Tensor(np.zeros(out_features), requires_grad=True)
    if config is not None:
        params[f"{name}.slope"] = Tensor(
            [config.prelu_init], requires_grad=True
        )


def build_model(config: ModelConfig, rng: np.random.Generator) -> CalibNet:
    """Create the network with orthogonally initialized weights.

    Args:
        config: Layer sizes
        rng: Initialization random generator

    Returns
    -------
        The network

    Raises
    ------
        ConfigInvalid: If the backbone leaves no spatial extent
    """
    height, width = feature_size(config)
    if height < 1 or width < 1:
        raise ConfigInvalid(
            f"model.image_size {config.image_size} is too small for "
            f"{len(config.backbone_channels)} backbone blocks"
        )
    params: dict[str, Tensor] = {}
    channels = config.backbone_channels
    _add_conv(params, "backbone.0", (channels[0], 3, KERNEL, KERNEL), config, rng)
    for k in range(1, len(channels)):
        c_in, c_out = channels[k - 1], channels[k]
        _add_conv(
            params,
            f"backbone.{k}.depthwise",
            (c_in, 1, KERNEL, KERNEL),
            config,
            rng,
        )
        _add_conv(
            params, f"backbone.{k}.pointwise", (c_out, c_in, 1, 1), config, rng
        )
    c_in, maps, kernel = channels[-1], config.mlpconv_maps, config.mlpconv_kernel
    for layer in range(config.mlpconv_layers):
        _add_conv(
            params,
            f"mlpconv.{layer}.spatial",
            (maps, c_in, kernel, kernel),
            config,
            rng,
        )
        for name in ("cccp1", "cccp2"):
            _add_conv(
                params, f"mlpconv.{layer}.{name}", (maps, maps, 1, 1), config, rng
            )
        c_in = maps
    _add_dense(
        params, "rgb.embed", config.embed_dim, maps * height * width, rng, config
    )
    _add_dense(
        params,
        "radar.embed",
        config.embed_dim,
        radar_pooled_size(config),
        rng,
        config,
    )
    in_features = 2 * config.embed_dim
    last = len(config.head) - 1
    for k, out_features in enumerate(config.head):
        _add_dense(
            params,
            f"head.{k}",
            out_features,
            in_features,
            rng,
            config if k < last else None,
        )
        in_features = out_features
    model = CalibNet(config, params)
    logger.debug(
        f"Built model with {model.parameter_count()} parameters "
        f"(feature map {height}x{width})"
    )
    return model
