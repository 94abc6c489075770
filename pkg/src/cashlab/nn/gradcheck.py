"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .params import ParamStore


def finite_diff_check(loss_fn, params: ParamStore, h: float = 1e-5,
                      max_coords_per_tensor: int = 5,
                      rng: np.random.Generator | None = None) -> float:
    """Compare analytic gradients of ``loss_fn()`` against central differences.

    ``loss_fn`` must be a deterministic zero-argument callable returning a
    scalar Tensor computed from ``params``. Returns the max over sampled
    coordinates of |analytic - numeric| / max(1, |analytic|, |numeric|).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    params.zero_grad()
    loss = loss_fn()
    if not np.isfinite(loss.data):
        raise FloatingPointError("loss is not finite")
    loss.backward()
    analytic = {n: (t.grad if t.grad is not None else np.zeros_like(t.data))
                for n, t in params.trainable_items()}

    worst = 0.0
    for name, t in params.trainable_items():
        n_coords = min(max_coords_per_tensor, t.data.size)
        coords = rng.choice(t.data.size, size=n_coords, replace=False)
        for flat_idx in coords:
            idx = np.unravel_index(flat_idx, t.data.shape)
            orig = t.data[idx]
            t.data[idx] = orig + h
            up = float(loss_fn().data)
            t.data[idx] = orig - h
            down = float(loss_fn().data)
            t.data[idx] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise FloatingPointError("loss is not finite during probing")
            numeric = (up - down) / (2.0 * h)
            a = float(analytic[name][idx])
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, err)
    return worst
