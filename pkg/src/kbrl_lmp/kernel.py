"""Reproducing kernels on state-action pairs.

A pair ``(s, p)`` embeds as ``[s / ||s||; action_scale * p]`` (length 2L+2) and
the kernel acts on those embeddings. States are normalized here, so callers
pass raw states.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Sequence

import numpy as np

from .model import StateAction, flatten, normalize_flat

HOMOGENEOUS_POLYNOMIAL = "homogeneous_polynomial"
GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class KernelSpec:
    kind: str = HOMOGENEOUS_POLYNOMIAL
    degree: int = 2
    bandwidth: float = 1.0
    action_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in (HOMOGENEOUS_POLYNOMIAL, GAUSSIAN):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.degree < 1:
            raise ValueError("degree must be a positive integer")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.action_scale < 0:
            raise ValueError("action_scale must be nonnegative")

    @property
    def nonnegative(self) -> bool:
        """Whether every kernel value is >= 0 (even-degree polynomial or Gaussian)."""
        return self.kind == GAUSSIAN or self.degree % 2 == 0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "KernelSpec":
        return cls(**data)


def embed_flat(states: np.ndarray, actions: np.ndarray | float, spec: KernelSpec) -> np.ndarray:
    """Embed flattened states (rows) paired with actions; normalizes each state row."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    actions = np.broadcast_to(np.asarray(actions, dtype=float), (states.shape[0],))
    out = np.empty((states.shape[0], states.shape[1] + 1))
    out[:, :-1] = normalize_flat(states)
    out[:, -1] = spec.action_scale * actions
    return out


def embed(z: StateAction, spec: KernelSpec) -> np.ndarray:
    return embed_flat(flatten(z.state), z.action, spec)[0]


def embed_many(zs: Sequence[StateAction], spec: KernelSpec) -> np.ndarray:
    if not zs:
        return np.empty((0, 0))
    states = np.stack([flatten(z.state) for z in zs])
    return embed_flat(states, np.array([z.action for z in zs]), spec)


def kernel_matrix(A: np.ndarray, B: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Kernel between rows of two embedding matrices."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    if spec.kind == HOMOGENEOUS_POLYNOMIAL:
        return (A @ B.T) ** spec.degree
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.exp(-np.maximum(sq, 0.0) / (2.0 * spec.bandwidth**2))


def kernel_diag(A: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """``kappa(z, z)`` for each row of ``A``."""
    A = np.atleast_2d(A)
    if spec.kind == HOMOGENEOUS_POLYNOMIAL:
        return (A * A).sum(1) ** spec.degree
    return np.ones(A.shape[0])


def kernel_eval(z: StateAction, z2: StateAction, spec: KernelSpec) -> float:
    a, b = embed(z, spec), embed(z2, spec)
    if spec.kind == HOMOGENEOUS_POLYNOMIAL:
        return float(np.dot(a, b) ** spec.degree)
    d = a - b
    return float(np.exp(-np.dot(d, d) / (2.0 * spec.bandwidth**2)))


def gram_matrix(A: Sequence[StateAction], B: Sequence[StateAction], spec: KernelSpec) -> np.ndarray:
    if not A or not B:
        return np.zeros((len(A), len(B)))
    return kernel_matrix(embed_many(A, spec), embed_many(B, spec), spec)
