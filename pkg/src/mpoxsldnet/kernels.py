"""Dense tensor kernels and their analytic backward passes.

Conventions used throughout the package:

  * activations are NHWC float arrays: (batch, height, width, channels)
  * convolution weights are (kh, kw, in_channels, out_channels)
  * production dtype is float32; every kernel preserves its input dtype, so
    gradient-check code can run the same path in float64

Convolution is cross-correlation (no kernel flip): each output element is
the windowed sum

    Y[n, i, j, o] = sum_{s,t,c} W[s, t, c, o] * Xpad[n, i*stride+s, j*stride+t, c] + b[o]

with spatial output dims ((input - kernel + 2*padding) // stride) + 1.
The production path lowers to im2col plus one matrix product; the test suite
checks it against an independently written nested-loop evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Raised when tensor shapes are inconsistent with an operation."""


def all_finite(x: np.ndarray) -> bool:
    """True when x contains no NaN or Inf; used by the trainer as a guard."""
    return bool(np.isfinite(x).all())


# ---------------------------------------------------------------------------
# geometry

@dataclass(frozen=True)
class ConvGeometry:
    """Static description of one convolution: input dims plus kernel/stride/padding."""

    input_h: int
    input_w: int
    in_channels: int
    out_channels: int
    kernel: tuple[int, int] = (3, 3)
    stride: int = 1
    padding: int = 0  # zero-fill count applied to every side

    @classmethod
    def same(cls, input_h, input_w, in_channels, out_channels,
             kernel=(3, 3), stride=1) -> "ConvGeometry":
        """'same' mode: pad so a stride-1 convolution preserves spatial dims.

        For the odd kernels used here this is (k - 1) // 2 on every side.
        """
        if kernel[0] != kernel[1] or kernel[0] % 2 == 0:
            raise ShapeError(f"'same' padding needs a square odd kernel, got {kernel}")
        return cls(input_h, input_w, in_channels, out_channels,
                   kernel=kernel, stride=stride, padding=(kernel[0] - 1) // 2)


def conv_output_shape(geom: ConvGeometry) -> tuple[int, int]:
    """Spatial output dims: ((input - kernel + 2*padding) // stride) + 1."""
    out = []
    for size, k in ((geom.input_h, geom.kernel[0]), (geom.input_w, geom.kernel[1])):
        o = (size - k + 2 * geom.padding) // geom.stride + 1
        if o <= 0:
            raise ShapeError(
                f"convolution output dim {o} is not positive for input {size}, "
                f"kernel {k}, padding {geom.padding}, stride {geom.stride}")
        out.append(o)
    return tuple(out)


def pool_output_shape(size: int, pool: int = 2, stride: int = 2) -> int:
    """Valid-mode pooling output dim: ((size - pool) // stride) + 1."""
    o = (size - pool) // stride + 1
    if o < 1:
        raise ShapeError(f"pool output dim {o} < 1 for input {size}, pool {pool}")
    return o


# ---------------------------------------------------------------------------
# convolution

def _check_conv_shapes(x: np.ndarray, w: np.ndarray, b: np.ndarray | None) -> None:
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be NHWC rank 4, got rank {x.ndim}")
    if w.ndim != 4:
        raise ShapeError(f"conv2d weights must be (kh, kw, in, out) rank 4, got rank {w.ndim}")
    if x.shape[3] != w.shape[2]:
        raise ShapeError(
            f"input channel dim {x.shape[3]} does not match weight in-channel dim {w.shape[2]}")
    if b is not None and b.shape != (w.shape[3],):
        raise ShapeError(f"bias shape {b.shape} does not match out channels {w.shape[3]}")


def im2col(x: np.ndarray, kh: int, kw: int, stride: int, padding: int) -> np.ndarray:
    """Gather sliding windows of x into rows.

    x: (N, H, W, C)  ->  (N * OH * OW, kh * kw * C), window entries in
    (s, t, c) row-major order so a reshape of the weights lines up.
    """
    n, h, w, c = x.shape
    oh = (h - kh + 2 * padding) // stride + 1
    ow = (w - kw + 2 * padding) // stride + 1
    if padding:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    cols = np.empty((n, oh, ow, kh, kw, c), dtype=x.dtype)
    for s in range(kh):
        for t in range(kw):
            cols[:, :, :, s, t, :] = x[:, s:s + stride * oh:stride,
                                       t:t + stride * ow:stride, :]
    return cols.reshape(n * oh * ow, kh * kw * c)


def col2im(cols: np.ndarray, input_shape, kh: int, kw: int,
           stride: int, padding: int) -> np.ndarray:
    """Scatter-add window rows back onto the input grid (inverse of im2col)."""
    n, h, w, c = input_shape
    oh = (h - kh + 2 * padding) // stride + 1
    ow = (w - kw + 2 * padding) // stride + 1
    cols = cols.reshape(n, oh, ow, kh, kw, c)
    out = np.zeros((n, h + 2 * padding, w + 2 * padding, c), dtype=cols.dtype)
    for s in range(kh):
        for t in range(kw):
            out[:, s:s + stride * oh:stride, t:t + stride * ow:stride, :] += \
                cols[:, :, :, s, t, :]
    if padding:
        out = out[:, padding:h + padding, padding:w + padding, :]
    return out


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray | None = None,
                   stride: int = 1, padding: int = 0) -> np.ndarray:
    """2-D convolution, NHWC in, NHWC out."""
    _check_conv_shapes(x, w, b)
    n, h, _, _ = x.shape
    kh, kw, _, out_c = w.shape
    geom = ConvGeometry(h, x.shape[2], x.shape[3], out_c,
                        kernel=(kh, kw), stride=stride, padding=padding)
    oh, ow = conv_output_shape(geom)
    cols = im2col(x, kh, kw, stride, padding)
    y = cols @ w.reshape(kh * kw * w.shape[2], out_c)
    if b is not None:
        y = y + b
    return y.reshape(n, oh, ow, out_c)


def conv2d_backward(x: np.ndarray, w: np.ndarray, grad_out: np.ndarray,
                    stride: int = 1, padding: int = 0):
    """Gradients of conv2d_forward w.r.t. input, weights and bias.

    grad_out: (N, OH, OW, out_c) upstream gradient.
    Returns (grad_x, grad_w, grad_b) with the shapes of x, w and (out_c,).
    """
    _check_conv_shapes(x, w, None)
    kh, kw, in_c, out_c = w.shape
    n, oh, ow, gc = grad_out.shape
    geom = ConvGeometry(x.shape[1], x.shape[2], in_c, out_c,
                        kernel=(kh, kw), stride=stride, padding=padding)
    if (oh, ow) != conv_output_shape(geom) or n != x.shape[0] or gc != out_c:
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match forward output "
            f"{(x.shape[0], *conv_output_shape(geom), out_c)}")
    g2 = grad_out.reshape(n * oh * ow, out_c)
    cols = im2col(x, kh, kw, stride, padding)
    grad_w = (cols.T @ g2).reshape(kh, kw, in_c, out_c)
    grad_b = g2.sum(axis=0)
    grad_cols = g2 @ w.reshape(kh * kw * in_c, out_c).T
    grad_x = col2im(grad_cols, x.shape, kh, kw, stride, padding)
    return grad_x, grad_w, grad_b


# ---------------------------------------------------------------------------
# max pooling

@dataclass(frozen=True)
class PoolContext:
    """Forward bookkeeping for the pooling backward pass.

    argmax holds, per (n, oh, ow, c), the flat spatial index (ih * W + iw) of
    the window winner; ties go to the lowest flat index.
    """

    argmax: np.ndarray
    input_shape: tuple[int, int, int, int]
    pool: int
    stride: int


def maxpool2d_forward(x: np.ndarray, pool: int = 2, stride: int = 2):
    """Max pooling (valid padding). Returns (output, PoolContext)."""
    if x.ndim != 4:
        raise ShapeError(f"maxpool input must be NHWC rank 4, got rank {x.ndim}")
    n, h, w, c = x.shape
    if h < pool or w < pool:
        raise ShapeError(f"spatial dims {(h, w)} smaller than pool window {pool}")
    oh = pool_output_shape(h, pool, stride)
    ow = pool_output_shape(w, pool, stride)
    # windows stacked in (s, t) row-major order, so argmax's first-max rule
    # picks the lowest flat input index on ties
    cols = np.stack([x[:, s:s + stride * oh:stride, t:t + stride * ow:stride, :]
                     for s in range(pool) for t in range(pool)], axis=3)
    k = cols.argmax(axis=3)
    out = np.take_along_axis(cols, k[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    ih = (np.arange(oh) * stride)[None, :, None, None] + k // pool
    iw = (np.arange(ow) * stride)[None, None, :, None] + k % pool
    ctx = PoolContext(argmax=ih * w + iw, input_shape=x.shape, pool=pool, stride=stride)
    return out, ctx


def maxpool2d_backward(ctx: PoolContext, grad_out: np.ndarray) -> np.ndarray:
    """Route each upstream gradient to its window's winning position."""
    n, h, w, c = ctx.input_shape
    if grad_out.shape != ctx.argmax.shape:
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match pooled shape {ctx.argmax.shape}")
    grad_in = np.zeros((n, h * w, c), dtype=grad_out.dtype)
    n_idx = np.arange(n)[:, None, None, None]
    c_idx = np.arange(c)[None, None, None, :]
    np.add.at(grad_in, (n_idx, ctx.argmax, c_idx), grad_out)
    return grad_in.reshape(n, h, w, c)


# ---------------------------------------------------------------------------
# matrix product and elementwise helpers

def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects rank-2 operands, got {a.ndim} and {b.ndim}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dims differ: {a.shape} x {b.shape}")
    return a @ b


def _check_same_shape(a: np.ndarray, b: np.ndarray, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op} operands must share a shape: {a.shape} vs {b.shape}")


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_same_shape(a, b, "add")
    return a + b


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_same_shape(a, b, "multiply")
    return a * b


def scale(a: np.ndarray, s: float) -> np.ndarray:
    return a * a.dtype.type(s)


def reduce_sum(a: np.ndarray, axis=None) -> np.ndarray:
    return a.sum(axis=axis)


def reduce_mean(a: np.ndarray, axis=None) -> np.ndarray:
    return a.mean(axis=axis)


def transpose(a: np.ndarray) -> np.ndarray:
    if a.ndim != 2:
        raise ShapeError(f"transpose expects a rank-2 operand, got rank {a.ndim}")
    return a.T
