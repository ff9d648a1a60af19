"""Adam optimizer and binary cross-entropy loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import ShapeError, all_finite

CLIP_EPS = 1e-7  # probability clip for log stability


@dataclass
class LossValue:
    value: float
    grad: np.ndarray


def bce_loss(pred: np.ndarray, target: np.ndarray) -> LossValue:
    """Mean binary cross-entropy over every output unit.

    Predictions are clipped to [CLIP_EPS, 1 - CLIP_EPS] before the log; the
    gradient is computed on the clipped values so loss and gradient stay
    consistent: grad = (p - y) / (p * (1 - p)) / count.
    """
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    one = pred.dtype.type(1)
    p = np.clip(pred, pred.dtype.type(CLIP_EPS), one - pred.dtype.type(CLIP_EPS))
    value = float(-np.mean(target * np.log(p) + (one - target) * np.log(one - p)))
    grad = (p - target) / (p * (one - p)) / pred.dtype.type(pred.size)
    return LossValue(value, grad)


class Adam:
    """Standard Adam recurrence over a dict of named parameter arrays.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
    theta <- theta - lr * mhat / (sqrt(vhat) + eps)
    with bias corrections mhat = m/(1-b1^t), vhat = v/(1-b2^t).
    Updates are applied in place so layer references stay valid.
    """

    def __init__(self, params: dict[str, np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p) for k, p in params.items()}
        self.v = {k: np.zeros_like(p) for k, p in params.items()}

    def step(self, grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            if name not in self.params:
                raise KeyError(f"gradient for unknown parameter {name!r}")
            if g.shape != self.params[name].shape:
                raise ShapeError(
                    f"gradient shape {g.shape} != parameter shape "
                    f"{self.params[name].shape} for {name!r}")
            if not all_finite(g):
                raise FloatingPointError(f"non-finite gradient for {name!r}")
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            p = self.params[name]
            m = self.m[name]
            v = self.v[name]
            m *= p.dtype.type(self.beta1)
            m += p.dtype.type(1.0 - self.beta1) * g
            v *= p.dtype.type(self.beta2)
            v += p.dtype.type(1.0 - self.beta2) * g * g
            mhat = m / p.dtype.type(bc1)
            vhat = v / p.dtype.type(bc2)
            p -= p.dtype.type(self.lr) * mhat / (np.sqrt(vhat) + p.dtype.type(self.eps))
