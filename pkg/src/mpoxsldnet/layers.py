"""Layer zoo and sequential container.

Every layer exposes forward(x, training), backward(grad), and dictionaries of
its trainable parameters, their gradients, and non-trainable state (running
statistics).  Forward caches whatever the matching backward needs; eval-mode
forward never mutates state, so it is deterministic and safe to share.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .kernels import ShapeError
from .rng import Xoshiro256StarStar, derive_seed


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(x, 0)."""
    return np.maximum(x, x.dtype.type(0))


def relu_backward(x: np.ndarray, grad: np.ndarray) -> np.ndarray:
    # subgradient at 0 is defined as 1, hence >= rather than >
    return grad * (x >= 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(y: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Backward from the cached forward output y = sigmoid(x)."""
    return grad * y * (1.0 - y)


def he_uniform(shape, fan_in: int, rng: Xoshiro256StarStar, dtype) -> np.ndarray:
    limit = float(np.sqrt(6.0 / fan_in))
    return rng.fill_uniform(shape, -limit, limit, dtype=dtype)


def glorot_uniform(shape, fan_in: int, fan_out: int, rng: Xoshiro256StarStar,
                   dtype) -> np.ndarray:
    limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return rng.fill_uniform(shape, -limit, limit, dtype=dtype)


class Layer:
    tag = "layer"

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def params(self) -> dict[str, np.ndarray]:
        return {}

    def grads(self) -> dict[str, np.ndarray]:
        return {}

    def state(self) -> dict[str, np.ndarray]:
        return {}

    def output_shape(self, shape: tuple) -> tuple:
        """Per-sample output shape for a per-sample input shape."""
        return shape


class ReLU(Layer):
    tag = "relu"

    def forward(self, x, training=False):
        self._x = x
        return relu(x)

    def backward(self, grad):
        return relu_backward(self._x, grad)


class Sigmoid(Layer):
    tag = "sigmoid"

    def forward(self, x, training=False):
        self._y = sigmoid(x)
        return self._y

    def backward(self, grad):
        return sigmoid_backward(self._y, grad)


class Flatten(Layer):
    tag = "flatten"

    def forward(self, x, training=False):
        if x.ndim != 4:
            raise ShapeError(f"flatten expects NHWC rank 4, got rank {x.ndim}")
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)

    def output_shape(self, shape):
        h, w, c = shape
        return (h * w * c,)


class Dense(Layer):
    """Affine map y = xW + b with an optional fused activation."""

    tag = "dense"

    def __init__(self, in_dim: int, units: int, activation: str | None = None,
                 init_rng: Xoshiro256StarStar | None = None, dtype=np.float32):
        if activation not in (None, "relu", "sigmoid"):
            raise ValueError(f"unsupported activation {activation!r}")
        if init_rng is None:
            init_rng = Xoshiro256StarStar(derive_seed(0, "init", f"dense{in_dim}x{units}"))
        self.in_dim = in_dim
        self.units = units
        self.activation = activation
        if activation == "sigmoid":
            self.w = glorot_uniform((in_dim, units), in_dim, units, init_rng, dtype)
        else:
            self.w = he_uniform((in_dim, units), in_dim, init_rng, dtype)
        self.b = np.zeros(units, dtype=dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(
                f"dense expects (N, {self.in_dim}), got {x.shape}")
        self._x = x
        z = x @ self.w + self.b
        if self.activation == "relu":
            self._z = z
            return relu(z)
        if self.activation == "sigmoid":
            self._y = sigmoid(z)
            return self._y
        return z

    def backward(self, grad):
        if self.activation == "relu":
            grad = relu_backward(self._z, grad)
        elif self.activation == "sigmoid":
            grad = sigmoid_backward(self._y, grad)
        self.gw = self._x.T @ grad
        self.gb = grad.sum(axis=0)
        return grad @ self.w.T

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.gw, "b": self.gb}

    def output_shape(self, shape):
        return (self.units,)


class Conv2D(Layer):
    """3x3-style convolution with optional fused activation, NHWC."""

    tag = "conv"

    def __init__(self, in_channels: int, filters: int, kernel: int = 3,
                 stride: int = 1, padding="same", activation: str | None = None,
                 init_rng: Xoshiro256StarStar | None = None, dtype=np.float32):
        if activation not in (None, "relu", "sigmoid"):
            raise ValueError(f"unsupported activation {activation!r}")
        if padding == "same":
            pad = (kernel - 1) // 2
        elif padding == "valid":
            pad = 0
        else:
            pad = int(padding)
        if init_rng is None:
            init_rng = Xoshiro256StarStar(
                derive_seed(0, "init", f"conv{in_channels}x{filters}"))
        self.in_channels = in_channels
        self.filters = filters
        self.kernel = kernel
        self.stride = stride
        self.padding = pad
        self.activation = activation
        fan_in = kernel * kernel * in_channels
        shape = (kernel, kernel, in_channels, filters)
        if activation == "sigmoid":
            self.w = glorot_uniform(shape, fan_in, kernel * kernel * filters,
                                    init_rng, dtype)
        else:
            self.w = he_uniform(shape, fan_in, init_rng, dtype)
        self.b = np.zeros(filters, dtype=dtype)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)

    def forward(self, x, training=False):
        self._x = x
        z = kernels.conv2d_forward(x, self.w, self.b,
                                   stride=self.stride, padding=self.padding)
        if self.activation == "relu":
            self._z = z
            return relu(z)
        if self.activation == "sigmoid":
            self._y = sigmoid(z)
            return self._y
        return z

    def backward(self, grad):
        if self.activation == "relu":
            grad = relu_backward(self._z, grad)
        elif self.activation == "sigmoid":
            grad = sigmoid_backward(self._y, grad)
        gx, self.gw, self.gb = kernels.conv2d_backward(
            self._x, self.w, grad, stride=self.stride, padding=self.padding)
        return gx

    def params(self):
        return {"w": self.w, "b": self.b}

    def grads(self):
        return {"w": self.gw, "b": self.gb}

    def output_shape(self, shape):
        h, w, _ = shape
        geom = kernels.ConvGeometry(h, w, self.in_channels, self.filters,
                                    kernel=(self.kernel, self.kernel),
                                    stride=self.stride, padding=self.padding)
        oh, ow = kernels.conv_output_shape(geom)
        return (oh, ow, self.filters)


class MaxPool2D(Layer):
    tag = "pool"

    def __init__(self, pool: int = 2, stride: int = 2):
        self.pool = pool
        self.stride = stride

    def forward(self, x, training=False):
        out, self._ctx = kernels.maxpool2d_forward(x, self.pool, self.stride)
        return out

    def backward(self, grad):
        return kernels.maxpool2d_backward(self._ctx, grad)

    def output_shape(self, shape):
        h, w, c = shape
        return (kernels.pool_output_shape(h, self.pool, self.stride),
                kernels.pool_output_shape(w, self.pool, self.stride), c)


class BatchNorm(Layer):
    """Batch normalization over NHWC (per channel) or NF (per feature) inputs.

    Train mode normalizes with batch statistics and updates the running
    estimates as running = momentum * running + (1 - momentum) * batch;
    eval mode normalizes with the running estimates only.
    """

    tag = "bn"

    def __init__(self, num_features: int, momentum: float = 0.9,
                 eps: float = 1e-5, dtype=np.float32):
        self.num_features = num_features
        self.momentum = momentum
        self.eps = eps
        self.gamma = np.ones(num_features, dtype=dtype)
        self.beta = np.zeros(num_features, dtype=dtype)
        self.running_mean = np.zeros(num_features, dtype=dtype)
        self.running_var = np.ones(num_features, dtype=dtype)
        self.ggamma = np.zeros_like(self.gamma)
        self.gbeta = np.zeros_like(self.beta)

    def _axes(self, x):
        if x.ndim == 4:
            return (0, 1, 2)
        if x.ndim == 2:
            return (0,)
        raise ShapeError(f"batchnorm expects rank 2 or 4, got rank {x.ndim}")

    def forward(self, x, training=False):
        axes = self._axes(x)
        if x.shape[-1] != self.num_features:
            raise ShapeError(
                f"batchnorm built for {self.num_features} features, got {x.shape[-1]}")
        if training:
            if x.shape[0] < 2:
                raise ValueError("batchnorm train mode requires batch size >= 2")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)  # population variance
            self.running_mean = (self.momentum * self.running_mean
                                 + (1.0 - self.momentum) * mean).astype(self.running_mean.dtype)
            self.running_var = (self.momentum * self.running_var
                                + (1.0 - self.momentum) * var).astype(self.running_var.dtype)
        else:
            mean = self.running_mean
            var = self.running_var
        std = np.sqrt(var + x.dtype.type(self.eps))
        xhat = (x - mean) / std
        if training:
            self._axes_cache = axes
            self._m = int(np.prod([x.shape[a] for a in axes]))
            self._std = std
            self._xhat = xhat
        else:
            self._eval_std = std
        self._training = training
        return self.gamma * xhat + self.beta

    def backward(self, grad):
        if not self._training:
            raise RuntimeError("backward through eval-mode batchnorm is not supported")
        axes = self._axes_cache
        m = self._m
        xhat = self._xhat
        dxhat = grad * self.gamma
        self.gbeta = grad.sum(axis=axes)
        self.ggamma = (grad * xhat).sum(axis=axes)
        sum_dxhat = dxhat.sum(axis=axes)
        sum_dxhat_xhat = (dxhat * xhat).sum(axis=axes)
        return (dxhat - (sum_dxhat + xhat * sum_dxhat_xhat) / m) / self._std

    def params(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def grads(self):
        return {"gamma": self.ggamma, "beta": self.gbeta}

    def state(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}


class Dropout(Layer):
    """Inverted dropout: train mode zeroes with probability rate and rescales
    survivors by 1/(1-rate); eval mode is the identity."""

    tag = "dropout"

    def __init__(self, rate: float, stream: Xoshiro256StarStar | None = None):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.stream = stream or Xoshiro256StarStar(derive_seed(0, "dropout"))

    def reseed(self, seed: int) -> None:
        self.stream = Xoshiro256StarStar(seed)

    def forward(self, x, training=False):
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        keep = self.stream.fill_uniform(x.shape, dtype=np.float64) >= self.rate
        self._mask = keep.astype(x.dtype) / x.dtype.type(1.0 - self.rate)
        return x * self._mask

    def backward(self, grad):
        if self._mask is None:
            return grad
        return grad * self._mask


class Sequential:
    """Ordered layer stack with a single forward/backward chain."""

    def __init__(self, layers: list[Layer]):
        self.layers = list(layers)

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        for layer in self.layers:
            x = layer.forward(x, training)
        return x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def named_params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, p in layer.params().items():
                out[f"{i:02d}.{layer.tag}.{name}"] = p
        return out

    def named_grads(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, g in layer.grads().items():
                out[f"{i:02d}.{layer.tag}.{name}"] = g
        return out

    def named_state(self) -> dict[str, np.ndarray]:
        out = {}
        for i, layer in enumerate(self.layers):
            for name, s in layer.state().items():
                out[f"{i:02d}.{layer.tag}.{name}"] = s
        return out

    def set_param(self, name: str, value: np.ndarray) -> None:
        idx, tag, pname = name.split(".")
        layer = self.layers[int(idx)]
        if layer.tag != tag:
            raise KeyError(f"layer {idx} has tag {layer.tag!r}, not {tag!r}")
        target = {**layer.params(), **layer.state()}[pname]
        if target.shape != value.shape:
            raise ShapeError(f"{name}: shape {value.shape} != expected {target.shape}")
        attr = {"w": "w", "b": "b", "gamma": "gamma", "beta": "beta",
                "running_mean": "running_mean", "running_var": "running_var"}[pname]
        setattr(layer, attr, value)

    def reseed_dropout(self, master_seed: int) -> None:
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Dropout):
                layer.reseed(derive_seed(master_seed, "dropout", i))
