"""Named parameter collections and gradient accumulation."""

from __future__ import annotations

from typing import Dict, Iterator, Tuple

import numpy as np

from .tensor import DTYPE, Tensor


class ParamStore:
    """Ordered map of named, trainable tensors.

    Iteration order is insertion order, which makes flattening, optimizer
    state and checkpoints deterministic.
    """

    def __init__(self):
        self._entries: Dict[str, Tensor] = {}
        self._trainable: Dict[str, bool] = {}

    def add(self, name: str, data: np.ndarray, trainable: bool = True) -> Tensor:
        if name in self._entries:
            raise KeyError(f"duplicate parameter name: {name}")
        t = Tensor(np.ascontiguousarray(data, dtype=DTYPE), requires_grad=trainable)
        self._entries[name] = t
        self._trainable[name] = trainable
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self):
        return list(self._entries)

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self._entries.items())

    def trainable_items(self) -> Iterator[Tuple[str, Tensor]]:
        return ((n, t) for n, t in self._entries.items() if self._trainable[n])

    def is_trainable(self, name: str) -> bool:
        return self._trainable[name]

    def count(self) -> int:
        """Total number of trainable scalar parameters."""
        return sum(t.size for _, t in self.trainable_items())

    def zero_grad(self):
        for _, t in self.trainable_items():
            t.grad = None

    def copy_from(self, other: "ParamStore"):
        """In-place copy of values (used for target network sync)."""
        if self.names() != other.names():
            raise KeyError("parameter stores have different entries")
        for name, t in self._entries.items():
            np.copyto(t.data, other._entries[name].data)

    def state_arrays(self) -> Dict[str, np.ndarray]:
        return {n: t.data for n, t in self._entries.items()}


class GradStore:
    """Gradients keyed like the trainable subset of a ParamStore."""

    def __init__(self, params: ParamStore):
        self._params = params
        self._grads: Dict[str, np.ndarray] = {}

    def collect(self) -> "GradStore":
        """Pull accumulated gradients off the parameter tensors."""
        self._grads = {}
        for name, t in self._params.trainable_items():
            g = t.grad if t.grad is not None else np.zeros_like(t.data)
            self._grads[name] = np.asarray(g, dtype=DTYPE)
        return self

    def __getitem__(self, name: str) -> np.ndarray:
        return self._grads[name]

    def __setitem__(self, name: str, value: np.ndarray):
        self._grads[name] = value

    def items(self):
        return iter(self._grads.items())

    def names(self):
        return list(self._grads)

    def zero(self):
        for name in self._grads:
            self._grads[name] = np.zeros_like(self._grads[name])
        self._params.zero_grad()

    def global_norm(self) -> float:
        total = 0.0
        for g in self._grads.values():
            total += float(np.sum(g * g))
        return float(np.sqrt(total))
