"""Central finite-difference gradient checking for the autodiff ops."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_gradient(fn: Callable[[], Tensor], leaf: Tensor, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar-valued closure w.r.t. ``leaf``.

    ``fn`` must recompute the scalar from the current contents of
    ``leaf.data``; the array is perturbed in place and restored.
    """
    grad = np.zeros_like(leaf.data)
    flat = leaf.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = fn().item()
        flat[i] = orig - eps
        lo = fn().item()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float = 1e-3) -> float:
    """Worst elementwise relative error; ``floor`` guards near-zero entries."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_gradients(fn: Callable[[], Tensor], leaves: Sequence[Tensor],
                    eps: float = 1e-5, tol: float = 1e-4) -> float:
    """Run backward once and compare every leaf against finite differences.

    Returns the worst relative error over all leaves; raises AssertionError
    when it exceeds ``tol``.
    """
    for leaf in leaves:
        leaf.zero_grad()
    out = fn()
    out.backward()
    worst = 0.0
    for leaf in leaves:
        analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        numeric = numerical_gradient(fn, leaf, eps=eps)
        err = max_relative_error(analytic, numeric)
        worst = max(worst, err)
        assert err <= tol, f"gradient mismatch {err:.3e} > {tol:.1e} for leaf {leaf.shape}"
    return worst
