"""Central finite differences for checking reverse-mode gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import autograd as ag


def numerical_grads(fn: Callable[..., float], arrays: Sequence[np.ndarray], step: float = 1e-5) -> list[np.ndarray]:
    """``d fn / d arrays[k]`` by central differences; ``fn`` takes the arrays and returns a float."""
    grads = []
    for k, arr in enumerate(arrays):
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = fn(*arrays)
            flat[i] = orig - step
            lo = fn(*arrays)
            flat[i] = orig
            g.reshape(-1)[i] = (hi - lo) / (2 * step)
        grads.append(g)
    return grads


def analytic_grads(fn: Callable[..., ag.Tensor], arrays: Sequence[np.ndarray]) -> list[np.ndarray]:
    params = [ag.Parameter(a.copy()) for a in arrays]
    loss = fn(*params)
    ag.backward(loss)
    return [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-7) -> float:
    """``||a - b|| / max(||a||, ||b||, floor)``.

    The floor keeps gradients that vanish analytically (e.g. an attention key
    bias, which softmax ignores) from dividing round-off by round-off.
    """
    denom = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / denom)


def check_gradients(fn: Callable[..., ag.Tensor], arrays: Sequence[np.ndarray], step: float = 1e-5,
                    reference_dtype=np.longdouble) -> float:
    """Largest relative error between autodiff and finite differences over all inputs.

    The finite differences are taken in ``reference_dtype``. Extended precision
    pushes their round-off (about eps·|f|/step) well below the error floor, so
    gradients that vanish analytically are not swamped by it.
    """
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    analytic = analytic_grads(fn, arrays)

    def value(*xs):
        with ag.no_grad(), ag.default_dtype(reference_dtype):
            return fn(*[ag.Tensor(x) for x in xs]).data

    wide = [a.astype(reference_dtype) for a in arrays]
    numeric = [g.astype(np.float64) for g in numerical_grads(value, wide, step)]
    return max(relative_error(a, n) for a, n in zip(analytic, numeric))
