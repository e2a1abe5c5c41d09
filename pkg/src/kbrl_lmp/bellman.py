"""Finite-dimensional Bellman operators on dictionary coefficients.

With ``Q = Phi_b xi`` and ``g = Phi_b eta``, the policy-evaluation mapping
acts on coefficient vectors as ``xi -> eta + alpha * Upsilon @ K_av_b @ xi``,
where ``K_av_b[j, i] = k(z_av_j, z_b_i)`` and ``Upsilon`` expresses the
averaging functions ``psi_j`` in the dictionary basis.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dictionary import Dictionary
from .kernel import KernelSpec, embed_flat, kernel_matrix
from .model import State, StateAction, flatten

MIN_NORM = "min_norm"
PROJECTION = "projection"
AS_PRINTED = "as_printed"
REPRODUCING = "reproducing"

# k^T K_b k (or k^T K_b^-1 k) below this means phi(z_n) is numerically outside the span.
_DEGENERATE = 1e-12


@dataclass
class BellmanOperands:
    eta: np.ndarray
    upsilon: np.ndarray
    K_av_b: np.ndarray
    alpha: float

    def __post_init__(self) -> None:
        n_b = self.eta.shape[0]
        if self.upsilon.shape[0] != n_b or self.K_av_b.shape != (self.upsilon.shape[1], n_b):
            raise ValueError(
                f"inconsistent operand shapes: eta {self.eta.shape}, upsilon {self.upsilon.shape}, "
                f"K_av_b {self.K_av_b.shape}"
            )

    @property
    def system_matrix(self) -> np.ndarray:
        """``I - alpha * Upsilon @ K_av_b``."""
        n_b = self.eta.shape[0]
        return np.eye(n_b) - self.alpha * (self.upsilon @ self.K_av_b)


def pad(v: np.ndarray, n: int) -> np.ndarray:
    """Zero-pad a coefficient vector up to length ``n``."""
    v = np.asarray(v, dtype=float)
    if v.shape[0] > n:
        raise ValueError(f"cannot shrink a coefficient vector from {v.shape[0]} to {n}")
    if v.shape[0] == n:
        return v
    out = np.zeros(n)
    out[: v.shape[0]] = v
    return out


def build_upsilon(n_av: int, n_b: int) -> np.ndarray:
    """``[I_{n_av}; 0]``: the averaging functions are the first ``n_av`` atoms."""
    if n_av > n_b:
        raise ValueError(f"N_av={n_av} exceeds dictionary size N_b={n_b}; clamp N_av first")
    if n_av < 1:
        raise ValueError("N_av must be positive")
    return np.eye(n_b, n_av)


def _is_leading_selection(upsilon: np.ndarray) -> bool:
    n_b, n_av = upsilon.shape
    return n_av <= n_b and np.array_equal(upsilon, np.eye(n_b, n_av))


def assemble_K_av_b(av_states: Sequence[State] | np.ndarray, action: float, d: Dictionary) -> np.ndarray:
    """Rows ``k(s_av_j / ||s_av_j||, action)^T`` over the dictionary atoms.

    ``av_states`` may be a list of states or a 2-d array of flattened states.
    """
    if not len(d):
        raise ValueError("K_av_b needs a non-empty dictionary")
    flat = np.asarray(av_states, dtype=float) if isinstance(av_states, np.ndarray) else np.stack([flatten(s) for s in av_states])
    E = embed_flat(flat, action, d.spec)
    return d.kernel_vectors(E).T


def eta_min_norm(
    K_b: np.ndarray,
    k: np.ndarray,
    g_val: float,
    constraint: str = AS_PRINTED,
    K_b_inv: np.ndarray | None = None,
) -> np.ndarray:
    """Minimum-norm coefficients reproducing the loss ``g_val`` at ``z_n``.

    ``as_printed`` returns ``g k / (k^T K_b k)``, which satisfies
    ``k^T K_b eta = g``. ``reproducing`` returns ``g K_b^-1 k / (k^T K_b^-1 k)``,
    which satisfies ``k^T eta = g`` (the K_b-metric minimum-norm point).
    """
    return eta_projection(K_b, k, g_val, np.zeros_like(k, dtype=float), constraint, K_b_inv)


def eta_projection(
    K_b: np.ndarray,
    k: np.ndarray,
    g_val: float,
    eta_prev: np.ndarray,
    constraint: str = AS_PRINTED,
    K_b_inv: np.ndarray | None = None,
) -> np.ndarray:
    """Project (zero-padded) ``eta_prev`` onto the loss-interpolation hyperplane."""
    eta_prev = pad(eta_prev, k.shape[0])
    if constraint == AS_PRINTED:
        Kk = K_b @ k
        denom = float(k @ Kk)
        if denom <= _DEGENERATE:
            return np.zeros_like(eta_prev)
        return eta_prev + (g_val - float(eta_prev @ Kk)) / denom * k
    if constraint == REPRODUCING:
        Kinv_k = np.linalg.solve(K_b, k) if K_b_inv is None else K_b_inv @ k
        denom = float(k @ Kinv_k)
        if denom <= _DEGENERATE:
            return np.zeros_like(eta_prev)
        return eta_prev + (g_val - float(eta_prev @ k)) / denom * Kinv_k
    raise ValueError(f"unknown eta constraint {constraint!r}")


def bellman_sharp_mu(xi: np.ndarray, ops: BellmanOperands) -> np.ndarray:
    return ops.eta + ops.alpha * (ops.upsilon @ (ops.K_av_b @ xi))


def bellman_sharp(
    xi: np.ndarray, eta: np.ndarray, upsilon: np.ndarray, K_av_b_by_action: np.ndarray, alpha: float
) -> np.ndarray:
    """Greedy counterpart: every averaging state takes its own minimizing action.

    ``K_av_b_by_action`` has shape ``(n_actions, N_av, N_b)``.
    """
    q_av = np.min(K_av_b_by_action @ xi, axis=0)
    return eta + alpha * (upsilon @ q_av)


def solve_xi(ops: BellmanOperands) -> tuple[np.ndarray, float]:
    """Minimum-norm least-squares solution of ``(I - alpha Upsilon K_av_b) xi = eta``.

    Returns the solution and the residual norm. When ``Upsilon`` selects the
    leading atoms the system is block upper-triangular with an identity
    trailing block, so only an ``N_av x N_av`` solve is needed; the dense
    least-squares route is used otherwise or when that block is
    ill-conditioned.
    """
    eta, alpha = ops.eta, ops.alpha
    if alpha == 0.0:
        return eta.copy(), 0.0
    if _is_leading_selection(ops.upsilon):
        n_av = ops.upsilon.shape[1]
        head = np.eye(n_av) - alpha * ops.K_av_b[:, :n_av]
        if np.linalg.cond(head) < 1e10:
            xi = eta.copy()
            rhs = eta[:n_av] + alpha * (ops.K_av_b[:, n_av:] @ eta[n_av:])
            xi[:n_av] = np.linalg.solve(head, rhs)
            return xi, float(np.linalg.norm(ops.system_matrix @ xi - eta))
    A = ops.system_matrix
    xi, *_ = np.linalg.lstsq(A, eta, rcond=None)
    return xi, float(np.linalg.norm(A @ xi - eta))


def q_eval(xi: np.ndarray, d: Dictionary, s: State, a: float) -> float:
    if not len(d):
        return 0.0
    return float(d.kernel_vector(StateAction(s, a)) @ xi)


def q_eval_flat(xi: np.ndarray, d: Dictionary, states: np.ndarray, actions: np.ndarray | float) -> np.ndarray:
    """Vectorized ``q_eval`` over rows of flattened states."""
    states = np.atleast_2d(states)
    if not len(d):
        return np.zeros(states.shape[0])
    return d.kernel_vectors(embed_flat(states, actions, d.spec)).T @ xi


def spectral_norm(M: np.ndarray) -> float:
    """Operator 2-norm of a symmetric matrix."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (M + M.T)))))


def alpha_bound(K_psi: np.ndarray, K_av_norm: float) -> float:
    """``(||K_psi|| * sup ||K_av||)^(-1/2)``; ``inf`` when either norm vanishes."""
    prod = spectral_norm(K_psi) * K_av_norm
    return float(prod ** -0.5) if prod > 0 else float("inf")


def av_gram_by_action(av_flat: np.ndarray, actions: Sequence[float], spec: KernelSpec) -> list[np.ndarray]:
    """Gram of the averaging atoms when all of them take the same action, per action."""
    return [kernel_matrix(E, E, spec) for E in (embed_flat(av_flat, a, spec) for a in actions)]


def sup_av_norm(
    av_flat: np.ndarray, actions: Sequence[float], spec: KernelSpec, exhaustive: bool = False
) -> float:
    """``sup_mu ||K_av_mu||`` over uniform action assignments, or over all of them."""
    av_flat = np.atleast_2d(av_flat)
    if not exhaustive:
        return max(spectral_norm(K) for K in av_gram_by_action(av_flat, actions, spec))
    n_av = av_flat.shape[0]
    if n_av > 6:
        raise ValueError("exhaustive sup is limited to N_av <= 6")
    per_action = np.stack([embed_flat(av_flat, a, spec) for a in actions])
    best = 0.0
    for assign in itertools.product(range(len(actions)), repeat=n_av):
        E = per_action[list(assign), np.arange(n_av)]
        best = max(best, spectral_norm(kernel_matrix(E, E, spec)))
    return best


def compute_alpha_bound(
    d: Dictionary,
    av_flat: np.ndarray,
    actions: Sequence[float],
    n_av: int | None = None,
    exhaustive: bool = False,
) -> float:
    """Largest discount keeping the Bellman mappings nonexpansive.

    ``K_psi`` is the leading ``n_av`` block of the dictionary Gram (the
    averaging functions are the first atoms); ``K_av`` ranges over the
    averaging states paired with grid actions.
    """
    av_flat = np.atleast_2d(av_flat)
    n_av = av_flat.shape[0] if n_av is None else n_av
    if n_av < 1:
        raise ValueError("N_av must be positive")
    K_psi = d.K[:n_av, :n_av]
    return alpha_bound(K_psi, sup_av_norm(av_flat[:n_av], actions, d.spec, exhaustive))

