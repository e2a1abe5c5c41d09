"""Least-mean p-power (LMP) filtering and the per-step loss it induces."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import DataStream, Scenario, State, generate_stream, normalized_deviation


@dataclass(frozen=True)
class LmpConfig:
    rho: float = 1e-3
    L: int = 10

    def __post_init__(self) -> None:
        if self.rho <= 0:
            raise ValueError("learning rate rho must be positive")
        if self.L < 1:
            raise ValueError("L must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def error_factor(e, p):
    """``|e|^(p-2) * e`` with value 0 at ``e == 0``; exact sign(e) at p=1 and e at p=2."""
    e = np.asarray(e, dtype=float)
    p = np.asarray(p, dtype=float)
    abs_e = np.abs(e)
    safe = np.where(abs_e > 0, abs_e, 1.0)
    out = np.where(p == 2.0, e, np.where(p == 1.0, np.sign(e), safe ** (p - 2.0) * e))
    return np.where(abs_e > 0, out, 0.0)


def lmp_update(theta: np.ndarray, x: np.ndarray, y: float, p: float, rho: float) -> np.ndarray:
    e = y - float(x @ theta)
    if e == 0.0:
        return theta.copy()
    if p == 2.0:
        f = e
    elif p == 1.0:
        f = 1.0 if e > 0 else -1.0
    else:
        f = abs(e) ** (p - 2.0) * e
    return theta + (rho * p * f) * x


def one_step_loss(s: State, a: float, rho: float) -> float:
    """Prior loss ``|e|^a`` plus posterior loss ``|y - theta'^T x|`` after one LMP step with p=a."""
    e = s.y - float(s.x @ s.theta)
    theta_next = lmp_update(s.theta, s.x, s.y, a, rho)
    return abs(e) ** a + abs(s.y - float(s.x @ theta_next))


def run_fixed_p_baseline(
    scenario: Scenario,
    p: float,
    rho: float,
    stream: DataStream | None = None,
    rng: np.random.Generator | None = None,
    theta0: np.ndarray | None = None,
) -> np.ndarray:
    """Normalized deviation trace of LMP with a constant ``p``.

    Entry ``n`` is ``||theta*(n) - theta_{n+1}|| / ||theta*(n)||``, i.e. the
    deviation after consuming sample ``n``. The stream is drawn from ``rng``
    (or the scenario seed) when not supplied.
    """
    if not 1.0 <= p <= 2.0:
        raise ValueError(f"p must lie in [1, 2], got {p}")
    if stream is None:
        rng = rng if rng is not None else np.random.default_rng(scenario.seed)
        if not scenario.is_realized:
            scenario = scenario.realize(rng)
        stream = generate_stream(scenario, rng)
    theta = np.zeros(scenario.L) if theta0 is None else np.array(theta0, dtype=float)
    trace = np.empty(len(stream))
    for n in range(len(stream)):
        theta = lmp_update(theta, stream.X[n], stream.y[n], p, rho)
        trace[n] = normalized_deviation(scenario.theta_at(n), theta)
    return trace
