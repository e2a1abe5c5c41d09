"""Randomized audits of the operator-level guarantees.

Each suite builds random small instances, evaluates the quantity of interest
through an independent route (explicit kernel loops, dense inverses,
hand-coded LMS) and reports the worst discrepancy against its tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bellman import (
    AS_PRINTED,
    REPRODUCING,
    BellmanOperands,
    assemble_K_av_b,
    bellman_sharp,
    bellman_sharp_mu,
    build_upsilon,
    compute_alpha_bound,
    eta_min_norm,
    eta_projection,
    q_eval,
)
from .dictionary import DELTA_ALD, Dictionary
from .kernel import KernelSpec, embed_flat, kernel_eval, kernel_matrix
from .lmp import lmp_update
from .model import StateAction, unflatten
from .noise import CAUCHY_LIKE, GAUSS_LIKE, NoiseSpec, alpha_stable_rvs, gaussian_noise_std
from .policy import DEFAULT_GRID


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    tolerance: float
    detail: str = ""
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: worst={self.worst:.3e} tol={self.tolerance:.1e} {self.detail}".rstrip()


def _random_dictionary(rng: np.random.Generator, spec: KernelSpec, L: int, n_min: int, n_max: int) -> Dictionary:
    d = Dictionary(spec)
    target = int(rng.integers(n_min, n_max + 1))
    for _ in range(10_000):
        if len(d) >= target:
            break
        d.maybe_add_flat(rng.standard_normal((1, 2 * L + 1)), float(rng.choice(DEFAULT_GRID)))
    return d


def _k_norm(v: np.ndarray, K: np.ndarray) -> float:
    return math.sqrt(max(float(v @ K @ v), 0.0))


def nonexpansiveness_suite(n_instances: int = 100, pairs: int = 10, seed: int = 0, tol: float = 1e-10) -> list[CheckResult]:
    """Nonexpansiveness of both mappings in the K_b metric and affinity of the policy one.

    Uses alpha equal to the bound with the supremum taken over every action
    assignment of the averaging states.
    """
    rng = np.random.default_rng(seed)
    spec = KernelSpec()
    grid = DEFAULT_GRID
    worst_ratio_mu = worst_ratio_greedy = worst_affine = 0.0
    for _ in range(n_instances):
        L = int(rng.integers(1, 3))
        n_av = int(rng.integers(1, 5))
        d = _random_dictionary(rng, spec, L, n_av, 8)
        n_av = min(n_av, len(d))
        av = rng.standard_normal((n_av, 2 * L + 1))
        alpha = compute_alpha_bound(d, av, grid, n_av, exhaustive=True)
        by_action = np.stack([assemble_K_av_b(av, a, d) for a in grid])
        mu = rng.integers(len(grid), size=n_av)
        K_mu = by_action[mu, np.arange(n_av)]
        eta = rng.standard_normal(len(d))
        ops = BellmanOperands(eta=eta, upsilon=build_upsilon(n_av, len(d)), K_av_b=K_mu, alpha=alpha)
        for _ in range(pairs):
            xi, xi2 = rng.standard_normal(len(d)) * 10, rng.standard_normal(len(d)) * 10
            base = _k_norm(xi - xi2, d.K)
            r_mu = _k_norm(bellman_sharp_mu(xi, ops) - bellman_sharp_mu(xi2, ops), d.K) / base
            diff = bellman_sharp(xi, eta, ops.upsilon, by_action, alpha) - bellman_sharp(xi2, eta, ops.upsilon, by_action, alpha)
            r_gr = _k_norm(diff, d.K) / base
            worst_ratio_mu = max(worst_ratio_mu, r_mu)
            worst_ratio_greedy = max(worst_ratio_greedy, r_gr)
            for lam in (-1.0, 0.0, 0.3, 1.0, 2.0):
                lhs = bellman_sharp_mu(lam * xi + (1 - lam) * xi2, ops)
                rhs = lam * bellman_sharp_mu(xi, ops) + (1 - lam) * bellman_sharp_mu(xi2, ops)
                scale = max(1.0, float(np.max(np.abs(rhs))))
                worst_affine = max(worst_affine, float(np.max(np.abs(lhs - rhs))) / scale)
    return [
        CheckResult("nonexpansive T_mu (K_b metric)", worst_ratio_mu <= 1 + tol, worst_ratio_mu - 1, tol, "max ratio - 1"),
        CheckResult("nonexpansive T (K_b metric)", worst_ratio_greedy <= 1 + tol, worst_ratio_greedy - 1, tol, "max ratio - 1"),
        CheckResult("affinity T_mu", worst_affine <= tol, worst_affine, tol, "relative error"),
    ]


def _functional_bellman(
    z: StateAction,
    atoms: list[StateAction],
    av: list[StateAction],
    eta: np.ndarray,
    xi: np.ndarray,
    upsilon: np.ndarray,
    alpha: float,
    spec: KernelSpec,
) -> float:
    """``(T_mu Q)(z) = g(z) + alpha * sum_j Q(z_av_j) psi_j(z)`` by explicit kernel sums."""
    g_z = sum(eta[i] * kernel_eval(atoms[i], z, spec) for i in range(len(atoms)))
    total = g_z
    for j, zj in enumerate(av):
        q_j = sum(xi[i] * kernel_eval(atoms[i], zj, spec) for i in range(len(atoms)))
        psi_j = sum(upsilon[i, j] * kernel_eval(atoms[i], z, spec) for i in range(len(atoms)))
        total += alpha * q_j * psi_j
    return total


def kernel_trick_suite(n_instances: int = 20, probes: int = 10, seed: int = 1, tol: float = 1e-8) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    spec = KernelSpec()
    worst = 0.0
    for _ in range(n_instances):
        L = int(rng.integers(1, 4))
        d = _random_dictionary(rng, spec, L, 1, 8)
        n_av = int(rng.integers(1, min(4, len(d)) + 1))
        av_flat = rng.standard_normal((n_av, 2 * L + 1))
        action = float(rng.choice(DEFAULT_GRID))
        av = [StateAction(unflatten(row), action) for row in av_flat]
        upsilon = rng.standard_normal((len(d), n_av))
        eta, xi = rng.standard_normal(len(d)), rng.standard_normal(len(d))
        alpha = float(rng.uniform(0, 1))
        ops = BellmanOperands(eta=eta, upsilon=upsilon, K_av_b=assemble_K_av_b(av_flat, action, d), alpha=alpha)
        t_xi = bellman_sharp_mu(xi, ops)
        for _ in range(probes):
            s = unflatten(rng.standard_normal(2 * L + 1))
            a = float(rng.choice(DEFAULT_GRID))
            ref = _functional_bellman(StateAction(s, a), d.atoms, av, eta, xi, upsilon, alpha, spec)
            got = q_eval(t_xi, d, s, a)
            worst = max(worst, abs(got - ref) / max(1.0, abs(ref)))
    return [CheckResult("kernel-trick equivalence", worst <= tol, worst, tol, "relative error")]


def eta_constraint_suite(n_instances: int = 100, seed: int = 2, tol: float = 1e-10) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    spec = KernelSpec()
    worst = {"min_norm/as_printed": 0.0, "projection/as_printed": 0.0, "min_norm/reproducing": 0.0, "projection/reproducing": 0.0}
    for _ in range(n_instances):
        L = int(rng.integers(1, 4))
        d = _random_dictionary(rng, spec, L, 1, 10)
        z = embed_flat(rng.standard_normal(2 * L + 1), float(rng.choice(DEFAULT_GRID)), spec)
        k = kernel_matrix(d.embeddings, z, spec)[:, 0]
        g = float(rng.exponential(2.0))
        prev = rng.standard_normal(max(len(d) - int(rng.integers(0, 2)), 1))
        for rule in ("min_norm", "projection"):
            for constraint in (AS_PRINTED, REPRODUCING):
                if rule == "min_norm":
                    eta = eta_min_norm(d.K, k, g, constraint, d.K_inv)
                else:
                    eta = eta_projection(d.K, k, g, prev, constraint, d.K_inv)
                # direct evaluation of the constraint each formula is meant to satisfy
                lhs = float(k @ (d.K @ eta)) if constraint == AS_PRINTED else float(k @ eta)
                err = abs(lhs - g) / max(1.0, abs(g))
                key = f"{rule}/{constraint}"
                worst[key] = max(worst[key], err)
    return [
        CheckResult(f"eta constraint {key}", w <= tol, w, tol, "relative error")
        for key, w in worst.items()
    ]


def _residual_from_scratch(atoms_E: np.ndarray, e: np.ndarray, spec: KernelSpec) -> float:
    """Normalized distance of phi(e) to span{phi(atoms)} via a fresh Gram solve."""
    kzz = float(kernel_matrix(e, e, spec)[0, 0])
    if atoms_E.shape[0] == 0:
        return 1.0
    G = kernel_matrix(atoms_E, atoms_E, spec)
    k = kernel_matrix(atoms_E, e, spec)[:, 0]
    res2 = kzz - float(k @ np.linalg.solve(G, k))
    return math.sqrt(max(res2, 0.0) / kzz)


def ald_suite(n_insertions: int = 200, seed: int = 3, L: int = 3, tol_inv: float = 1e-6) -> list[CheckResult]:
    """Incremental Gram inverse vs a fresh inverse, and the admission audit.

    Every atom must be farther than ``delta`` (in angle sine) from the span of
    the atoms admitted before it and from each other single atom. A
    non-incremental replay decides membership independently.
    """
    rng = np.random.default_rng(seed)
    spec = KernelSpec()
    d = Dictionary(spec)
    cands = rng.standard_normal((n_insertions, 2 * L + 1))
    acts = rng.choice(DEFAULT_GRID, n_insertions)
    added = [d.maybe_add_flat(c[None, :], a)[0] for c, a in zip(cands, acts)]

    G = kernel_matrix(d.embeddings, d.embeddings, spec)
    inv_err = float(np.max(np.abs(d.K_inv - np.linalg.inv(G))))
    gram_err = float(np.max(np.abs(d.K - G)))

    E = d.embeddings
    pred = [_residual_from_scratch(E[:i], E[i : i + 1], spec) for i in range(len(d))]
    pair = min(
        (_residual_from_scratch(E[j : j + 1], E[i : i + 1], spec) for i in range(len(d)) for j in range(len(d)) if i != j),
        default=1.0,
    )
    loo = np.sqrt(1.0 / np.diag(np.linalg.inv(G)) / np.diag(G))

    replay_E = np.empty((0, E.shape[1]))
    replay = []
    for c, a in zip(cands, acts):
        e = embed_flat(c, a, spec)
        ok = _residual_from_scratch(replay_E, e, spec) > DELTA_ALD
        replay.append(ok)
        if ok:
            replay_E = np.vstack([replay_E, e])
    return [
        CheckResult("ALD incremental inverse", inv_err <= tol_inv, inv_err, tol_inv, f"N_b={len(d)}"),
        CheckResult("ALD incremental Gram", gram_err <= 1e-10, gram_err, 1e-10),
        CheckResult(
            "ALD residual vs predecessors > delta",
            min(pred) > DELTA_ALD,
            min(pred),
            DELTA_ALD,
            f"min leave-one-out={loo.min():.3f} (informational, not implied by sequential admission)",
        ),
        CheckResult("ALD pairwise sine > delta", pair > DELTA_ALD, pair, DELTA_ALD),
        CheckResult("ALD membership vs fresh replay", replay == added, float(sum(r != a for r, a in zip(replay, added))), 0.0),
    ]


def lmp_special_case_suite(steps: int = 1000, seed: int = 4, L: int = 10, rho: float = 1e-3, tol: float = 1e-12) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    theta_star = rng.standard_normal(L)
    X = rng.standard_normal((steps, L))
    y = X @ theta_star + 0.3 * rng.standard_normal(steps)
    out = []
    for p, name in ((2.0, "LMS"), (1.0, "sign-LMS")):
        theta = np.zeros(L)
        ref = np.zeros(L)
        worst = 0.0
        for n in range(steps):
            theta = lmp_update(theta, X[n], y[n], p, rho)
            e = y[n] - float(np.dot(X[n], ref))
            step = 2 * rho * e if p == 2.0 else rho * float(np.sign(e))
            ref = ref + step * X[n]
            worst = max(worst, float(np.max(np.abs(theta - ref))))
        out.append(CheckResult(f"LMP p={p:g} equals {name}", worst <= tol, worst, tol))
    return out


def noise_suite(n: int = 100_000, seed: int = 5) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    scale = 0.7
    draws = alpha_stable_rvs(NoiseSpec(kind="alpha_stable", stability=2.0, scale=scale), rng, n)
    var_err = abs(np.var(draws) / (2 * scale**2) - 1)

    L = 10
    theta = rng.standard_normal(L)
    theta /= np.linalg.norm(theta)
    X = rng.standard_normal((n, L))
    o = gaussian_noise_std(theta, 20.0) * rng.standard_normal(n)
    snr = 10 * math.log10(np.mean((X @ theta) ** 2) / np.mean(o**2))

    tail_c = float(np.mean(np.abs(alpha_stable_rvs(CAUCHY_LIKE, rng, n)) > 10))
    tail_g = float(np.mean(np.abs(alpha_stable_rvs(GAUSS_LIKE, rng, n)) > 10))
    return [
        CheckResult("stability=2 variance = 2 scale^2", var_err <= 0.05, var_err, 0.05, "relative error"),
        CheckResult("Gaussian segment SNR 20 dB", abs(snr - 20) <= 0.5, abs(snr - 20), 0.5, f"empirical={snr:.3f} dB"),
        CheckResult(
            "Cauchy-like tail mass >= 10x Gauss-like",
            tail_c >= 10 * tail_g and tail_c > 0,
            tail_c,
            10 * tail_g,
            f"P(|o|>10): cauchy={tail_c:.4f} gauss={tail_g:.2e}",
        ),
    ]


def run_all() -> list[CheckResult]:
    results = []
    for suite in (nonexpansiveness_suite, kernel_trick_suite, eta_constraint_suite, ald_suite, lmp_special_case_suite, noise_suite):
        results.extend(suite())
    return results


__all__ = [
    "CheckResult",
    "ald_suite",
    "eta_constraint_suite",
    "kernel_trick_suite",
    "lmp_special_case_suite",
    "noise_suite",
    "nonexpansiveness_suite",
    "run_all",
]
