"""Rollout policy improvement over the p-grid."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .bellman import q_eval_flat
from .dictionary import Dictionary
from .lmp import lmp_update, one_step_loss
from .model import State, flatten, unflatten

PREVIOUS_ACTION = "previous_action"
RANDOM = "random"
SMALLEST_P = "smallest_p"
LARGEST_P = "largest_p"

DEFAULT_GRID = (1.0, 1.25, 1.5, 1.75, 2.0)


@dataclass(frozen=True)
class PolicyConfig:
    action_grid: tuple[float, ...] = DEFAULT_GRID
    M: int = 2
    heuristic: str = PREVIOUS_ACTION
    alpha: float = 0.9
    N_av: int = 10
    av_sigma: float = 0.1
    tie_break: str = SMALLEST_P

    def __post_init__(self) -> None:
        grid = tuple(float(a) for a in self.action_grid)
        if not grid:
            raise ValueError("action grid must be non-empty")
        if any(not 1.0 <= a <= 2.0 for a in grid):
            raise ValueError(f"actions must lie in [1, 2], got {grid}")
        object.__setattr__(self, "action_grid", grid)
        if self.M < 1:
            raise ValueError("rollout depth M must be >= 1")
        if self.heuristic not in (PREVIOUS_ACTION, RANDOM):
            raise ValueError(f"unknown heuristic {self.heuristic!r}")
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0, 1)")
        if self.N_av < 1:
            raise ValueError("N_av must be positive")
        if self.av_sigma < 0:
            raise ValueError("av_sigma must be nonnegative")
        if self.tie_break not in (SMALLEST_P, LARGEST_P):
            raise ValueError(f"unknown tie-break rule {self.tie_break!r}")

    @property
    def midpoint(self) -> float:
        """Grid element used before any action has been taken."""
        grid = sorted(self.action_grid)
        return grid[(len(grid) - 1) // 2]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["action_grid"] = list(self.action_grid)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "PolicyConfig":
        data = dict(data)
        if "action_grid" in data:
            data["action_grid"] = tuple(data["action_grid"])
        return cls(**data)


def sample_av_states(s_n: State, N_av: int, av_sigma: float, rng: np.random.Generator) -> list[State]:
    flat = sample_av_flat(flatten(s_n), N_av, av_sigma, rng)
    return [unflatten(row) for row in flat]


def sample_av_flat(s_flat: np.ndarray, N_av: int, av_sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Gaussian cloud of ``N_av`` flattened states around ``s_flat``."""
    if N_av < 1:
        raise ValueError("N_av must be positive")
    return s_flat + av_sigma * rng.standard_normal((N_av, s_flat.shape[0]))


def heuristic_action(cfg: PolicyConfig, previous: float | None, rng: np.random.Generator | None = None) -> float:
    if cfg.heuristic == RANDOM:
        if rng is None:
            raise ValueError("random heuristic needs a random stream")
        return cfg.action_grid[int(rng.integers(len(cfg.action_grid)))]
    return cfg.midpoint if previous is None else previous


@dataclass
class Rollout:
    """One simulated trajectory: successor states and the heuristic actions taken there."""

    states: list[State] = field(default_factory=list)
    actions: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.states)


def rollout_trajectory(
    s_n: State,
    a: float,
    cfg: PolicyConfig,
    previous: float | None,
    rho: float,
    rng: np.random.Generator | None = None,
) -> Rollout:
    """Successors of ``s_n`` under ``a`` and then the heuristic policy.

    No future data exist online, so the pair ``(x_n, y_n)`` is held fixed and
    only the estimate evolves through the LMP recursion.
    """
    out = Rollout()
    theta = lmp_update(s_n.theta, s_n.x, s_n.y, a, rho)
    for m in range(cfg.M):
        s = State(s_n.x, s_n.y, theta)
        b = heuristic_action(cfg, previous, rng)
        out.states.append(s)
        out.actions.append(b)
        if m + 1 < cfg.M:
            theta = lmp_update(theta, s_n.x, s_n.y, b, rho)
    return out


def rollout_objective(
    s_n: State,
    xi: np.ndarray | None,
    d: Dictionary | None,
    cfg: PolicyConfig,
    previous: float | None,
    rho: float,
    alpha: float | None = None,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Rollout cost of every grid action, in grid order.

    ``g(s_n, a) + sum_{m<M} alpha^m g(s_m, mu(s_m)) + alpha^M Q(s_M, mu(s_M))``.
    The Q term is dropped while the dictionary is empty.
    """
    alpha = cfg.alpha if alpha is None else alpha
    costs = np.empty(len(cfg.action_grid))
    terminal = []
    for i, a in enumerate(cfg.action_grid):
        traj = rollout_trajectory(s_n, a, cfg, previous, rho, rng)
        c = one_step_loss(s_n, a, rho)
        for m in range(1, cfg.M):
            c += alpha**m * one_step_loss(traj.states[m - 1], traj.actions[m - 1], rho)
        costs[i] = c
        terminal.append((traj.states[-1], traj.actions[-1]))
    if d is not None and len(d) and xi is not None:
        flat = np.stack([flatten(s) for s, _ in terminal])
        q = q_eval_flat(xi, d, flat, np.array([b for _, b in terminal]))
        costs = costs + alpha ** cfg.M * q
    return costs


def select_action(grid: tuple[float, ...], costs: np.ndarray, tie_break: str = SMALLEST_P) -> float:
    best = np.min(costs)
    tied = [a for a, c in zip(grid, costs) if c == best]
    if not tied:  # all-NaN costs
        raise FloatingPointError("rollout costs are not finite")
    return min(tied) if tie_break == SMALLEST_P else max(tied)


def improve_policy(
    s_n: State,
    xi: np.ndarray | None,
    d: Dictionary | None,
    cfg: PolicyConfig,
    previous: float | None,
    rho: float,
    alpha: float | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Grid action minimizing the rollout cost."""
    costs = rollout_objective(s_n, xi, d, cfg, previous, rho, alpha, rng)
    return select_action(cfg.action_grid, costs, cfg.tie_break)
