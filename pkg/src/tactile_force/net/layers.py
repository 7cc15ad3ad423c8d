"""Differentiable layers with hand-written forward/backward passes.

Every layer caches what its backward pass needs during forward, accumulates
parameter gradients into Parameter.grad, and returns the gradient with
respect to its input. All math is float64 numpy; convolutions are "valid"
(no padding) and are implemented as a sum over kernel offsets of strided
views, which keeps the arithmetic exact and vectorized for the small kernels
used here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import SchemaError


@dataclass
class Parameter:
    name: str
    value: np.ndarray
    grad: np.ndarray = field(default=None)

    def __post_init__(self):
        self.value = np.asarray(self.value, dtype=float)
        if self.grad is None:
            self.grad = np.zeros_like(self.value)


class Layer:
    """Base layer: subclasses implement forward/backward and list parameters."""

    name = "layer"

    def parameters(self) -> list[Parameter]:
        return []

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad.fill(0.0)

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_input(self, x: np.ndarray, expected_tail: tuple[int, ...]) -> None:
        if x.shape[1:] != expected_tail:
            raise SchemaError(
                f"layer {self.name}: expected input shape (batch, {expected_tail}), "
                f"got {x.shape}"
            )


def _fan_in_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


class Dense(Layer):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, name: str = "dense"):
        self.name = name
        self.in_dim, self.out_dim = in_dim, out_dim
        self.weight = Parameter(f"{name}.weight", _fan_in_uniform(rng, (in_dim, out_dim), in_dim))
        self.bias = Parameter(f"{name}.bias", np.zeros(out_dim))
        self._x = None

    def parameters(self):
        return [self.weight, self.bias]

    def forward(self, x):
        self._check_input(x, (self.in_dim,))
        self._x = x
        return x @ self.weight.value + self.bias.value

    def backward(self, grad_out):
        self.weight.grad += self._x.T @ grad_out
        self.bias.grad += grad_out.sum(axis=0)
        return grad_out @ self.weight.value.T


class _ConvNd(Layer):
    """Valid N-D convolution via patch extraction (im2col) and one matmul.

    The strided input patches are gathered into (batch, in_ch * k^ndim,
    n_windows) once per forward and cached; forward and both backward
    contractions then reduce to single BLAS calls.
    """

    ndim = 3

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int,
        stride: int,
        rng: np.random.Generator,
        name: str,
    ):
        self.name = name
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel, self.stride = kernel, stride
        fan_in = in_channels * kernel**self.ndim
        self.weight = Parameter(
            f"{name}.weight",
            _fan_in_uniform(rng, (out_channels, in_channels) + (kernel,) * self.ndim, fan_in),
        )
        self.bias = Parameter(f"{name}.bias", np.zeros(out_channels))
        self._patches = None
        self._in_spatial = None

    def parameters(self):
        return [self.weight, self.bias]

    def _offsets(self):
        ranges = [range(self.kernel)] * self.ndim
        out = [()]
        for r in ranges:
            out = [o + (d,) for o in out for d in r]
        return out

    def _window(self, offset, out_spatial):
        s = self.stride
        return tuple(
            slice(d, d + s * n, s) for d, n in zip(offset, out_spatial)
        )

    def forward(self, x):
        if x.ndim != 2 + self.ndim or x.shape[1] != self.in_channels:
            raise SchemaError(
                f"layer {self.name}: expected (batch, {self.in_channels}, "
                f"{self.ndim} spatial dims), got {x.shape}"
            )
        k, s = self.kernel, self.stride
        out_spatial = tuple((d - k) // s + 1 for d in x.shape[2:])
        if any(d < 1 for d in out_spatial):
            raise SchemaError(
                f"layer {self.name}: spatial dims {x.shape[2:]} too small for kernel {k}"
            )
        b = x.shape[0]
        offsets = self._offsets()
        patches = np.empty((b, self.in_channels, len(offsets)) + out_spatial)
        for j, off in enumerate(offsets):
            patches[:, :, j] = x[(slice(None), slice(None)) + self._window(off, out_spatial)]
        n_windows = int(np.prod(out_spatial))
        self._patches = patches.reshape(b, self.in_channels * len(offsets), n_windows)
        self._in_spatial = x.shape[2:]
        w2 = self._weight_matrix()
        out = np.tensordot(w2, self._patches, axes=([1], [1]))  # (out_ch, b, windows)
        out = np.moveaxis(out, 0, 1).reshape((b, self.out_channels) + out_spatial)
        return out + self.bias.value.reshape((1, -1) + (1,) * self.ndim)

    def _weight_matrix(self):
        # (out_ch, in_ch * k^ndim) with the offset axis ordered like _offsets()
        return self.weight.value.reshape(self.out_channels, self.in_channels, -1).reshape(
            self.out_channels, -1
        )

    def backward(self, grad_out):
        b = grad_out.shape[0]
        out_spatial = grad_out.shape[2:]
        g2 = grad_out.reshape(b, self.out_channels, -1)
        dw = np.tensordot(g2, self._patches, axes=([0, 2], [0, 2]))
        self.weight.grad += dw.reshape(self.weight.value.shape)
        self.bias.grad += g2.sum(axis=(0, 2))
        dpatches = np.tensordot(self._weight_matrix(), g2, axes=([0], [1]))  # (ck, b, win)
        offsets = self._offsets()
        dpatches = np.moveaxis(dpatches, 1, 0).reshape(
            (b, self.in_channels, len(offsets)) + tuple(out_spatial)
        )
        grad_x = np.zeros((b, self.in_channels) + self._in_spatial)
        for j, off in enumerate(offsets):
            grad_x[(slice(None), slice(None)) + self._window(off, out_spatial)] += dpatches[
                :, :, j
            ]
        return grad_x


class Conv3d(_ConvNd):
    """Valid 3-D convolution, weight shape (out_ch, in_ch, k, k, k)."""

    ndim = 3

    def __init__(self, in_channels, out_channels, kernel, stride, rng, name="conv3d"):
        super().__init__(in_channels, out_channels, kernel, stride, rng, name)


class Conv2d(_ConvNd):
    """Valid 2-D convolution, weight shape (out_ch, in_ch, k, k)."""

    ndim = 2

    def __init__(self, in_channels, out_channels, kernel, stride, rng, name="conv2d"):
        super().__init__(in_channels, out_channels, kernel, stride, rng, name)


class LayerNorm(Layer):
    """Per-sample normalization over all feature axes, with elementwise
    gain and offset of the feature shape."""

    def __init__(self, feature_shape: tuple[int, ...], eps: float = 1e-5, name: str = "ln"):
        self.name = name
        self.feature_shape = tuple(feature_shape)
        self.eps = eps
        self.gain = Parameter(f"{name}.gain", np.ones(self.feature_shape))
        self.offset = Parameter(f"{name}.offset", np.zeros(self.feature_shape))
        self._xhat = None
        self._inv_std = None

    def parameters(self):
        return [self.gain, self.offset]

    @property
    def _axes(self):
        return tuple(range(1, 1 + len(self.feature_shape)))

    def forward(self, x):
        self._check_input(x, self.feature_shape)
        mu = x.mean(axis=self._axes, keepdims=True)
        var = x.var(axis=self._axes, keepdims=True)
        self._inv_std = 1.0 / np.sqrt(var + self.eps)
        self._xhat = (x - mu) * self._inv_std
        return self.gain.value * self._xhat + self.offset.value

    def backward(self, grad_out):
        axes = self._axes
        self.gain.grad += (grad_out * self._xhat).sum(axis=0)
        self.offset.grad += grad_out.sum(axis=0)
        g = grad_out * self.gain.value
        mean_g = g.mean(axis=axes, keepdims=True)
        mean_gx = (g * self._xhat).mean(axis=axes, keepdims=True)
        return (g - mean_g - self._xhat * mean_gx) * self._inv_std


class ReLU(Layer):
    """max(0, x); the subgradient at exactly zero is taken as zero."""

    def __init__(self, name: str = "relu"):
        self.name = name
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad_out):
        return np.where(self._mask, grad_out, 0.0)


class CollapseDepth(Layer):
    """(batch, c, x, y, z) -> (batch, c*z, x, y): fold depth into channels."""

    def __init__(self, name: str = "collapse_depth"):
        self.name = name
        self._shape = None

    def forward(self, x):
        if x.ndim != 5:
            raise SchemaError(f"layer {self.name}: expected a 5-D input, got shape {x.shape}")
        self._shape = x.shape
        b, c, sx, sy, sz = x.shape
        return np.transpose(x, (0, 1, 4, 2, 3)).reshape(b, c * sz, sx, sy)

    def backward(self, grad_out):
        b, c, sx, sy, sz = self._shape
        return np.transpose(grad_out.reshape(b, c, sz, sx, sy), (0, 1, 3, 4, 2))


class Flatten(Layer):
    def __init__(self, name: str = "flatten"):
        self.name = name
        self._shape = None

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad_out):
        return grad_out.reshape(self._shape)
