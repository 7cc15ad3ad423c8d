"""Force regression models assembled from the layer primitives.

The voxel model follows the fixed pattern: a stack of 3-D convolutions, the
depth axis folded into channels, one 2-D convolution, then fully connected
layers down to the 3-vector force output, with layer norm and ReLU after
every convolutional and fully connected layer except the output. All
convolutions use kernel and stride 2; on inputs whose spatial extent has
already shrunk below the kernel, the 2-D stage degrades to a 1x1
convolution so reduced test configurations stay differentiable end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NumericalError
from .layers import CollapseDepth, Conv2d, Conv3d, Dense, Flatten, Layer, LayerNorm, Parameter, ReLU

OUTPUT_DIM = 3


@dataclass(frozen=True)
class NetworkConfig:
    """Voxel network hyperparameters.

    Kernel and stride are 2 for every convolutional layer; channel counts and
    fully connected widths are the tunable knobs.
    """

    conv3d_channels: tuple[int, ...] = (8, 16)
    conv2d_channels: int = 32
    fc_widths: tuple[int, ...] = (128, 64)
    kernel: int = 2
    stride: int = 2
    layer_norm_eps: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.kernel != 2 or self.stride != 2:
            raise ConfigError("convolution kernel and stride are fixed at 2")
        if not self.conv3d_channels:
            raise ConfigError("at least one 3-D convolution layer is required")
        object.__setattr__(self, "conv3d_channels", tuple(int(c) for c in self.conv3d_channels))
        object.__setattr__(self, "fc_widths", tuple(int(w) for w in self.fc_widths))

    def to_dict(self) -> dict:
        return {
            "conv3d_channels": list(self.conv3d_channels),
            "conv2d_channels": self.conv2d_channels,
            "fc_widths": list(self.fc_widths),
            "kernel": self.kernel,
            "stride": self.stride,
            "layer_norm_eps": self.layer_norm_eps,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        return cls(
            conv3d_channels=tuple(d["conv3d_channels"]),
            conv2d_channels=int(d["conv2d_channels"]),
            fc_widths=tuple(d["fc_widths"]),
            kernel=int(d.get("kernel", 2)),
            stride=int(d.get("stride", 2)),
            layer_norm_eps=float(d.get("layer_norm_eps", 1e-5)),
            seed=int(d.get("seed", 0)),
        )


class Model:
    """Sequential container over layers with a shared parameter list.

    `input_kind` records which featurization the model consumes: "voxel" for
    (batch, 2, nx, ny, nz) grids, "flat" for (batch, d) vectors.
    """

    def __init__(self, layers: list[Layer], input_kind: str, input_shape: tuple[int, ...]):
        self.layers = layers
        self.input_kind = input_kind
        self.input_shape = tuple(input_shape)

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.zero_grad()

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = np.asarray(x, dtype=float)
        for layer in self.layers:
            out = layer.forward(out)
        if not np.all(np.isfinite(out)):
            raise NumericalError("non-finite network output")
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad = grad_out
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
            if not np.all(np.isfinite(grad)):
                raise NumericalError(f"non-finite gradient flowing out of layer {layer.name}")
        return grad

    def get_state(self) -> list[np.ndarray]:
        return [p.value.copy() for p in self.parameters()]

    def set_state(self, state: list[np.ndarray]) -> None:
        params = self.parameters()
        if len(state) != len(params):
            raise ConfigError(
                f"state has {len(state)} tensors, model has {len(params)} parameters"
            )
        for p, value in zip(params, state):
            if p.value.shape != value.shape:
                raise ConfigError(
                    f"parameter {p.name}: shape {p.value.shape} != stored {value.shape}"
                )
            p.value = np.array(value, dtype=float)


def _conv_out(size: int, kernel: int, stride: int) -> int:
    return (size - kernel) // stride + 1


def build_voxel_net(
    config: NetworkConfig, input_shape: tuple[int, int, int, int] = (2, 15, 15, 7)
) -> Model:
    """Assemble the voxel force network for a given input grid shape."""
    rng = np.random.default_rng(config.seed)
    c, sx, sy, sz = input_shape
    layers: list[Layer] = []
    for i, out_ch in enumerate(config.conv3d_channels):
        layers.append(Conv3d(c, out_ch, config.kernel, config.stride, rng, name=f"conv3d_{i}"))
        sx, sy, sz = (_conv_out(d, config.kernel, config.stride) for d in (sx, sy, sz))
        if min(sx, sy, sz) < 1:
            raise ConfigError(f"conv3d_{i} output collapses below 1 voxel for input {input_shape}")
        c = out_ch
        layers.append(LayerNorm((c, sx, sy, sz), config.layer_norm_eps, name=f"ln_conv3d_{i}"))
        layers.append(ReLU(name=f"relu_conv3d_{i}"))
    layers.append(CollapseDepth())
    c, sz = c * sz, 1
    k2d = min(config.kernel, sx, sy)  # clamp for degenerate small test grids
    s2d = config.stride if k2d == config.kernel else 1
    layers.append(Conv2d(c, config.conv2d_channels, k2d, s2d, rng, name="conv2d"))
    sx, sy = _conv_out(sx, k2d, s2d), _conv_out(sy, k2d, s2d)
    c = config.conv2d_channels
    layers.append(LayerNorm((c, sx, sy), config.layer_norm_eps, name="ln_conv2d"))
    layers.append(ReLU(name="relu_conv2d"))
    layers.append(Flatten())
    dim = c * sx * sy
    for i, width in enumerate(config.fc_widths):
        layers.append(Dense(dim, width, rng, name=f"fc_{i}"))
        layers.append(LayerNorm((width,), config.layer_norm_eps, name=f"ln_fc_{i}"))
        layers.append(ReLU(name=f"relu_fc_{i}"))
        dim = width
    layers.append(Dense(dim, OUTPUT_DIM, rng, name="fc_out"))
    return Model(layers, input_kind="voxel", input_shape=input_shape)


def build_mlp_net(
    input_dim: int,
    hidden_widths: tuple[int, ...],
    seed: int = 0,
    layer_norm: bool = True,
    layer_norm_eps: float = 1e-5,
) -> Model:
    """Plain fully connected force regressor on a flat feature vector."""
    if not hidden_widths:
        raise ConfigError("at least one hidden layer is required")
    rng = np.random.default_rng(seed)
    layers: list[Layer] = []
    dim = input_dim
    for i, width in enumerate(hidden_widths):
        layers.append(Dense(dim, int(width), rng, name=f"fc_{i}"))
        if layer_norm:
            layers.append(LayerNorm((int(width),), layer_norm_eps, name=f"ln_fc_{i}"))
        layers.append(ReLU(name=f"relu_fc_{i}"))
        dim = int(width)
    layers.append(Dense(dim, OUTPUT_DIM, rng, name="fc_out"))
    return Model(layers, input_kind="flat", input_shape=(input_dim,))
