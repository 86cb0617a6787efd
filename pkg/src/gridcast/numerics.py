"""Minimal numerical kernel: sparse-dense products, stable activations,
central-difference gradient checking, global-norm clipping, and Adam.

All arithmetic is float64. Public ops reject non-finite inputs and never emit
non-finite values from finite ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ValidationError
from .graph import NormalizedAdjacency


def require_finite(name: str, arr: np.ndarray) -> None:
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite values in {name}")


def spmm(adj: NormalizedAdjacency, dense: np.ndarray) -> np.ndarray:
    """Sparse @ dense product; equals the densified matrix product exactly."""
    if dense.ndim != 2 or dense.shape[0] != adj.n:
        raise ValidationError(
            f"dimension mismatch: adjacency is {adj.n}x{adj.n}, dense is {dense.shape}"
        )
    require_finite("spmm input", dense)
    return adj.matrix @ dense


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function via 0.5 * (1 + tanh(x / 2)).

    The tanh form saturates gracefully and avoids the division that makes the
    exp formulation slow.
    """
    out = np.tanh(x * 0.5)
    out *= 0.5
    out += 0.5
    return out


def grad_check(
    f: Callable[[Sequence[np.ndarray]], float],
    grad: Callable[[Sequence[np.ndarray]], Sequence[np.ndarray]],
    params: Sequence[np.ndarray],
    eps: float = 1e-5,
) -> float:
    """Max relative error between the analytic gradient and central differences.

    Per coordinate: |analytic - numeric| / max(1, |numeric|), maximized over all
    coordinates of all parameter arrays.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValidationError("finite-difference step must lie in [1e-7, 1e-3]")
    params = [np.array(p, dtype=np.float64) for p in params]
    analytic = grad(params)
    if len(analytic) != len(params):
        raise ValidationError("gradient structure does not match the parameters")
    worst = 0.0
    for k, p in enumerate(params):
        a = np.asarray(analytic[k], dtype=np.float64)
        if a.shape != p.shape:
            raise ValidationError(f"gradient {k} has shape {a.shape}, expected {p.shape}")
        flat = p.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            f_plus = float(f(params))
            flat[idx] = orig - eps
            f_minus = float(f(params))
            flat[idx] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericError("non-finite objective at a finite-difference probe")
            numeric = (f_plus - f_minus) / (2.0 * eps)
            err = abs(a.reshape(-1)[idx] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst


def global_norm(arrays: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(a * a)) for a in arrays)))


def clip_global_norm(arrays: Sequence[np.ndarray], max_norm: float) -> float:
    """Scale all arrays in place so their joint norm is at most ``max_norm``."""
    norm = global_norm(arrays)
    if norm > max_norm and norm > 0.0:
        scale = max_norm / norm
        for a in arrays:
            a *= scale
    return norm


@dataclass
class AdamState:
    """First/second-moment accumulators plus hyperparameters for Adam."""

    learning_rate: float
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], learning_rate: float,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        if learning_rate <= 0:
            raise ValidationError("learning rate must be positive")
        return cls(
            learning_rate=learning_rate,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              state: AdamState) -> Sequence[np.ndarray]:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValidationError("params, grads, and state must have matching structure")
    for g in grads:
        if not np.isfinite(g).all():
            raise NumericError("non-finite gradient input to the optimizer")
    state.step += 1
    b1c = 1.0 - state.beta1 ** state.step
    b2c = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValidationError(f"gradient shape {g.shape} does not match {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.learning_rate * (m / b1c) / (np.sqrt(v / b2c) + state.eps)
    return params
