"""Adam/AdamW updates, gradient clipping, linear schedules."""

from __future__ import annotations

import numpy as np

from .params import GradStore, ParamStore


class GradientError(RuntimeError):
    """Raised when a gradient is non-finite."""


class OptimizerState:
    """Per-parameter first/second moment buffers plus hyperparameters."""

    def __init__(self, params: ParamStore, lr: float, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = {n: np.zeros_like(t.data) for n, t in params.trainable_items()}
        self.v = {n: np.zeros_like(t.data) for n, t in params.trainable_items()}


def adam_step(params: ParamStore, grads: GradStore, state: OptimizerState,
              lr: float | None = None) -> None:
    """In-place AdamW update (decoupled weight decay; plain Adam when decay=0).

    ``lr`` overrides the stored learning rate for scheduled runs.
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise GradientError(f"non-finite gradient for parameter '{name}'")
    lr = state.lr if lr is None else lr
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        w = params[name].data
        if state.weight_decay:
            w -= lr * state.weight_decay * w
        w -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def clip_grad_norm(grads: GradStore, max_norm: float) -> float:
    """Scale all gradients so the global L2 norm is at most ``max_norm``.

    Returns the pre-clip norm.
    """
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = grads.global_norm()
    if norm > max_norm:
        factor = max_norm / norm
        for name, g in grads.items():
            grads[name] = g * factor
    return norm


def linear_schedule(start: float, end: float, duration: float, t: float) -> float:
    """Linear interpolation from ``start`` to ``end`` over ``duration`` steps,
    constant afterwards."""
    if t >= duration:
        return end
    return start + (end - start) * (t / duration)
