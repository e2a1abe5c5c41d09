"""Growing kernel dictionary sparsified by approximate linear dependency (ALD)."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .kernel import KernelSpec, embed, embed_flat, kernel_diag, kernel_matrix
from .model import State, StateAction, normalize_state, unflatten

DELTA_ALD = math.sin(40 * math.pi / 180)

# Schur complements below this trigger a full re-inversion of the Gram matrix.
_SCHUR_FLOOR = 1e-10
# relative floor on k(z,z) - k^T K^-1 k (sine of ~1e-6)
_ROUNDOFF = 1e-12


class Dictionary:
    """Ordered atoms ``z_i = (s_i / ||s_i||, p_i)`` with Gram matrix and inverse.

    Parameters
    ----------
    spec : KernelSpec
        Kernel used for every Gram entry.
    delta_ald : float
        ALD admission threshold.
    max_size : int, optional
        Hard cap on the number of atoms; unbounded by default.
    normalized : bool
        If True (default) a candidate enters when ``residual / sqrt(k(z, z))``
        exceeds ``delta_ald``, i.e. the sine of its angle to the current span.
        If False the raw RKHS residual is compared instead.
    """

    def __init__(
        self,
        spec: KernelSpec,
        delta_ald: float = DELTA_ALD,
        max_size: int | None = None,
        normalized: bool = True,
    ):
        if not 0.0 < delta_ald < 1.0 and normalized:
            raise ValueError("normalized ALD threshold must lie in (0, 1)")
        if max_size is not None and max_size < 1:
            raise ValueError("max_size must be positive")
        self.spec = spec
        self.delta_ald = delta_ald
        self.max_size = max_size
        self.normalized = normalized
        self.atoms: list[StateAction] = []
        self.embeddings = np.empty((0, 0))
        self.K = np.empty((0, 0))
        self.K_inv = np.empty((0, 0))

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def full(self) -> bool:
        return self.max_size is not None and len(self) >= self.max_size

    def kernel_vectors(self, E: np.ndarray) -> np.ndarray:
        """Kernel between every atom and each embedding row of ``E`` (N_b x m)."""
        return kernel_matrix(self.embeddings, E, self.spec)

    def kernel_vector(self, z: StateAction) -> np.ndarray:
        if not self.atoms:
            raise ValueError("kernel vector of an empty dictionary")
        return self.kernel_vectors(embed(z, self.spec)[None, :])[:, 0]

    def _residuals(self, E: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        kz = self.kernel_vectors(E)
        coeffs = self.K_inv @ kz
        kzz = kernel_diag(E, self.spec)
        res2 = kzz - np.einsum("ij,ij->j", kz, coeffs)
        # below this the squared residual is cancellation noise, not distance
        res2[res2 <= _ROUNDOFF * kzz] = 0.0
        return kz, coeffs, np.sqrt(res2)

    def ald_residual(self, z: StateAction) -> tuple[np.ndarray, float]:
        """Coefficients of the projection of phi(z) onto the span, and the RKHS distance."""
        if not self.atoms:
            raise ValueError("ALD residual against an empty dictionary")
        _, coeffs, res = self._residuals(embed(z, self.spec)[None, :])
        return coeffs[:, 0], float(res[0])

    def _admits(self, residual: float, kzz: float) -> bool:
        if self.normalized:
            return residual / math.sqrt(kzz) > self.delta_ald
        return residual > self.delta_ald

    def maybe_add(self, z: StateAction) -> bool:
        """ALD test for ``z``; appends its normalized form if it qualifies."""
        atom = StateAction(normalize_state(z.state), float(z.action))
        return self._maybe_add_embedding(embed(atom, self.spec), atom)

    def maybe_add_flat(self, states: np.ndarray, actions: np.ndarray | float) -> list[bool]:
        """Sequential ALD tests for a batch of flattened raw states, in row order.

        Equivalent to calling :meth:`maybe_add` on each row in turn, but the
        residuals of the batch are computed together and refreshed only
        after an admission.
        """
        states = np.atleast_2d(states)
        E = embed_flat(states, actions, self.spec)
        acts = np.broadcast_to(np.asarray(actions, dtype=float), (states.shape[0],))
        added = [False] * len(E)
        start = 0
        while start < len(E):
            if self.full:
                break
            if not self.atoms:
                added[start] = self._maybe_add_embedding(E[start], self._atom(E[start], acts[start]))
                start += 1
                continue
            kzz = kernel_diag(E[start:], self.spec)
            _, _, res = self._residuals(E[start:])
            hit = None
            for j in range(len(res)):
                if kzz[j] > 0.0 and self._admits(res[j], kzz[j]):
                    hit = start + j
                    break
            if hit is None:
                break
            added[hit] = self._maybe_add_embedding(E[hit], self._atom(E[hit], acts[hit]))
            start = hit + 1
        return added

    def _atom(self, e: np.ndarray, action: float) -> StateAction:
        return StateAction(unflatten(e[:-1].copy()), float(action))

    def _maybe_add_embedding(self, e: np.ndarray, atom: StateAction) -> bool:
        kzz = float(kernel_diag(e[None, :], self.spec)[0])
        if kzz <= 0.0 or self.full:
            return False
        if not self.atoms:
            self.embeddings = e[None, :].copy()
            self.K = np.array([[kzz]])
            self.K_inv = np.array([[1.0 / kzz]])
            self.atoms.append(atom)
            return True
        kz, coeffs, res = self._residuals(e[None, :])
        if not self._admits(float(res[0]), kzz):
            return False
        self._append(e, atom, kz[:, 0], coeffs[:, 0], kzz)
        return True

    def _append(self, e: np.ndarray, atom: StateAction, k: np.ndarray, a: np.ndarray, kzz: float) -> None:
        n = len(self.atoms)
        K = np.empty((n + 1, n + 1))
        K[:n, :n] = self.K
        K[:n, n] = K[n, :n] = k
        K[n, n] = kzz
        schur = kzz - float(k @ a)
        if schur > _SCHUR_FLOOR:
            K_inv = np.empty((n + 1, n + 1))
            K_inv[:n, :n] = self.K_inv + np.outer(a, a) / schur
            K_inv[:n, n] = K_inv[n, :n] = -a / schur
            K_inv[n, n] = 1.0 / schur
        else:
            K_inv = np.linalg.inv(K)
        self.embeddings = np.vstack([self.embeddings, e])
        self.K, self.K_inv = K, K_inv
        self.atoms.append(atom)

    # checkpointing

    def to_dict(self) -> dict:
        return {
            "kernel": self.spec.to_dict(),
            "delta_ald": self.delta_ald,
            "max_size": self.max_size,
            "normalized": self.normalized,
            "atoms": [
                {"x": z.state.x.tolist(), "y": z.state.y, "theta": z.state.theta.tolist(), "action": z.action}
                for z in self.atoms
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Dictionary":
        """Rebuild from a checkpoint; Gram and inverse are recomputed, atoms kept as stored."""
        d = cls(KernelSpec.from_dict(data["kernel"]), data["delta_ald"], data.get("max_size"), data.get("normalized", True))
        atoms = [StateAction(State(a["x"], a["y"], a["theta"]), float(a["action"])) for a in data["atoms"]]
        if atoms:
            d.atoms = atoms
            d.embeddings = np.stack([embed(z, d.spec) for z in atoms])
            d.K = kernel_matrix(d.embeddings, d.embeddings, d.spec)
            d.K = 0.5 * (d.K + d.K.T)
            d.K_inv = np.linalg.inv(d.K)
        return d

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "Dictionary":
        return cls.from_dict(json.loads(Path(path).read_text()))
