"""Layers and initializers built on the autodiff core."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .params import ParamStore
from .tensor import DTYPE, ShapeError, Tensor


def orthogonal_init(shape, scale: float, rng: np.random.Generator) -> np.ndarray:
    """Scaled (semi-)orthogonal matrix: all singular values equal ``scale``."""
    rows, cols = shape
    if scale == 0.0:
        return np.zeros((rows, cols), dtype=DTYPE)
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q = q * np.sign(np.diag(r))  # fix sign ambiguity for determinism
    if rows < cols:
        q = q.T
    return (scale * q).astype(DTYPE)


def linear_forward(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with backward support."""
    if x.data.shape[-1] != w.data.shape[0]:
        raise ShapeError(
            f"linear input {x.data.shape} does not match weight {w.data.shape}"
        )
    return T.add(T.matmul(x, w), b)


class Linear:
    def __init__(self, store: ParamStore, prefix: str, d_in: int, d_out: int,
                 rng: np.random.Generator, scale: float = 1.0):
        self.w = store.add(f"{prefix}.w", orthogonal_init((d_in, d_out), scale, rng))
        self.b = store.add(f"{prefix}.b", np.zeros(d_out, dtype=DTYPE))

    def __call__(self, x: Tensor) -> Tensor:
        return linear_forward(x, self.w, self.b)


class LayerNormParams:
    def __init__(self, store: ParamStore, prefix: str, d: int):
        self.gain = store.add(f"{prefix}.gain", np.ones(d, dtype=DTYPE))
        self.bias = store.add(f"{prefix}.bias", np.zeros(d, dtype=DTYPE))

    def __call__(self, x: Tensor) -> Tensor:
        return T.layer_norm(x, self.gain, self.bias)


class GRUCell:
    """Single GRU step.

    Gate convention:
        r = sigma(W_r x + U_r h + b_r)
        z = sigma(W_z x + U_z h + b_z)
        htil = tanh(W_h x + U_h (r*h) + b_h)
        h' = (1 - z) * h + z * htil
    """

    def __init__(self, store: ParamStore, prefix: str, d_in: int, d_hid: int,
                 rng: np.random.Generator):
        self.d_in = d_in
        self.d_hid = d_hid
        for gate in ("r", "z", "h"):
            store.add(f"{prefix}.W_{gate}", orthogonal_init((d_in, d_hid), 1.0, rng))
            store.add(f"{prefix}.U_{gate}", orthogonal_init((d_hid, d_hid), 1.0, rng))
            store.add(f"{prefix}.b_{gate}", np.zeros(d_hid, dtype=DTYPE))
        self._p = {k: store[f"{prefix}.{k}"]
                   for k in ("W_r", "U_r", "b_r", "W_z", "U_z", "b_z",
                             "W_h", "U_h", "b_h")}

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        return gru_step(x, h, self._p)


def gru_step(x: Tensor, h: Tensor, params: dict) -> Tensor:
    """One GRU update; ``params`` maps W_r..b_h to tensors."""
    if h.data.shape[-1] != params["U_r"].data.shape[0]:
        raise ShapeError(
            f"hidden state {h.data.shape} does not match recurrent weight "
            f"{params['U_r'].data.shape}"
        )
    r = T.sigmoid(T.add(T.add(T.matmul(x, params["W_r"]), T.matmul(h, params["U_r"])),
                        params["b_r"]))
    z = T.sigmoid(T.add(T.add(T.matmul(x, params["W_z"]), T.matmul(h, params["U_z"])),
                        params["b_z"]))
    htil = T.tanh(T.add(T.add(T.matmul(x, params["W_h"]),
                              T.matmul(T.mul(r, h), params["U_h"])),
                        params["b_h"]))
    one_minus_z = T.shift(T.scale(z, -1.0), 1.0)
    return T.add(T.mul(one_minus_z, h), T.mul(z, htil))
