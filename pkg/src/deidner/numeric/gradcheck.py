from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor, backward


def relative_error(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))


def analytic_gradients(f: Callable[[], Tensor], params: Sequence[Tensor]) -> list[np.ndarray]:
    for p in params:
        p.grad = np.zeros_like(p.data)
    with Tape() as tape:
        loss = f()
    backward(loss, tape)
    return [p.grad.copy() for p in params]


def numeric_gradients(f: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-5) -> list[np.ndarray]:
    """Central differences, one coordinate at a time."""
    out = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = float(f().data)
            flat[i] = orig - eps
            fm = float(f().data)
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * eps)
        out.append(g)
    return out


def finite_difference_check(
    f: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-5
) -> float:
    """Max relative error between backward() gradients and central differences.

    ``f`` rebuilds the scalar loss from the current values of ``params``; it is
    called once under a tape and twice per coordinate without one.
    """
    ana = analytic_gradients(f, params)
    num = numeric_gradients(f, params, eps)
    worst = 0.0
    for a, b in zip(ana, num):
        if a.size:
            worst = max(worst, float(relative_error(a, b).max()))
    return worst
