"""States, state-action pairs, and the streaming data model ``y = theta*^T x + o``."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from .noise import GAUSSIAN_SNR, NoiseSpec, sample_noise


@dataclass(frozen=True, eq=False)
class State:
    """Filter state ``(x, y, theta)``; flattens to ``[x; y; theta]``."""

    x: np.ndarray
    y: float
    theta: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if x.ndim != 1 or x.shape != theta.shape:
            raise ValueError(f"x and theta must be 1-d of equal length, got {x.shape} and {theta.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "y", float(self.y))

    @property
    def L(self) -> int:
        return self.x.shape[0]

    def flatten(self) -> np.ndarray:
        return flatten(self)

    @classmethod
    def zeros(cls, L: int) -> "State":
        return cls(np.zeros(L), 0.0, np.zeros(L))


class StateAction(NamedTuple):
    state: State
    action: float


def flatten(s: State) -> np.ndarray:
    return np.concatenate([s.x, [s.y], s.theta])


def unflatten(v: np.ndarray) -> State:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] % 2 != 1:
        raise ValueError(f"expected a vector of odd length 2L+1, got shape {v.shape}")
    L = v.shape[0] // 2
    return State(v[:L].copy(), float(v[L]), v[L + 1 :].copy())


def normalize_flat(v: np.ndarray) -> np.ndarray:
    """Row-wise ``v / ||v||``; zero rows are returned unchanged."""
    v = np.asarray(v, dtype=float)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    return np.divide(v, norms, out=v.copy(), where=norms > 0)


def normalize_state(s: State) -> State:
    return unflatten(normalize_flat(flatten(s)))


@dataclass(frozen=True, eq=False)
class Scenario:
    """Data-generation setup for one experiment.

    ``theta_star`` may be left as ``None``; :meth:`realize` then draws it from
    IID standard normals. The same holds for the post-change system in
    ``system_change = (index, theta_or_None)``.
    """

    L: int
    horizon: int
    noise_segments: tuple[tuple[int, NoiseSpec], ...]
    theta_star: np.ndarray | None = None
    system_change: tuple[int, np.ndarray | None] | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.L < 1:
            raise ValueError("L must be positive")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        segs = tuple((int(start), spec) for start, spec in self.noise_segments)
        if not segs or segs[0][0] != 0:
            raise ValueError("noise segments must start at index 0")
        starts = [start for start, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("noise segment starts must be strictly increasing")
        if self.horizon > 0 and starts[-1] >= self.horizon:
            raise ValueError("every noise segment must start before the horizon")
        object.__setattr__(self, "noise_segments", segs)
        if self.theta_star is not None:
            theta = np.asarray(self.theta_star, dtype=float)
            if theta.shape != (self.L,):
                raise ValueError(f"theta_star must have length {self.L}")
            object.__setattr__(self, "theta_star", theta)
        if self.system_change is not None:
            index, new_theta = self.system_change
            if not 0 <= index < max(self.horizon, 1):
                raise ValueError("system change index must lie in [0, horizon)")
            if new_theta is not None:
                new_theta = np.asarray(new_theta, dtype=float)
                if new_theta.shape != (self.L,):
                    raise ValueError(f"changed system must have length {self.L}")
            object.__setattr__(self, "system_change", (int(index), new_theta))

    @property
    def is_realized(self) -> bool:
        return self.theta_star is not None and (self.system_change is None or self.system_change[1] is not None)

    def realize(self, rng: np.random.Generator) -> "Scenario":
        """Fill in any undrawn system vectors from ``rng``."""
        theta = self.theta_star if self.theta_star is not None else rng.standard_normal(self.L)
        change = self.system_change
        if change is not None and change[1] is None:
            change = (change[0], rng.standard_normal(self.L))
        return replace(self, theta_star=theta, system_change=change)

    def theta_at(self, n: int) -> np.ndarray:
        if self.theta_star is None:
            raise ValueError("scenario has no system vector; call realize() first")
        if self.system_change is not None and n >= self.system_change[0]:
            return self.system_change[1]
        return self.theta_star

    def segment_index(self, n: int) -> int:
        idx = 0
        for i, (start, _) in enumerate(self.noise_segments):
            if n >= start:
                idx = i
        return idx

    def segment_bounds(self) -> list[tuple[int, int]]:
        starts = [start for start, _ in self.noise_segments]
        return list(zip(starts, starts[1:] + [self.horizon]))

    def to_dict(self) -> dict[str, Any]:
        change = None
        if self.system_change is not None:
            index, theta = self.system_change
            change = {"index": index, "theta": None if theta is None else theta.tolist()}
        return {
            "L": self.L,
            "horizon": self.horizon,
            "noise_segments": [{"start": start, "noise": spec.to_dict()} for start, spec in self.noise_segments],
            "theta_star": None if self.theta_star is None else self.theta_star.tolist(),
            "system_change": change,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Scenario":
        change = data.get("system_change")
        if change is not None:
            change = (change["index"], change.get("theta"))
        return cls(
            L=data["L"],
            horizon=data["horizon"],
            noise_segments=tuple((seg["start"], NoiseSpec.from_dict(seg["noise"])) for seg in data["noise_segments"]),
            theta_star=data.get("theta_star"),
            system_change=change,
            seed=data.get("seed", 0),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class DataStream:
    X: np.ndarray
    y: np.ndarray
    noise: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.y.shape[0]


def _noise_value(spec: NoiseSpec, theta: np.ndarray, rng: np.random.Generator) -> float:
    return float(sample_noise(spec, theta, rng, 1)[0])


def generate_sample(scenario: Scenario, n: int, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """One pair ``(x_n, y_n)``; draws x first, then the noise, from ``rng``."""
    if not 0 <= n < scenario.horizon:
        raise IndexError(f"time index {n} outside [0, {scenario.horizon})")
    theta = scenario.theta_at(n)
    x = rng.standard_normal(scenario.L)
    _, spec = scenario.noise_segments[scenario.segment_index(n)]
    return x, float(theta @ x) + _noise_value(spec, theta, rng)


def generate_stream(scenario: Scenario, rng: np.random.Generator) -> DataStream:
    """The whole horizon at once.

    Draw order is fixed: all regressors, then the noise of each segment in
    turn. Gaussian segments spanning a system change are calibrated
    piecewise against the system active at each sample.
    """
    if not scenario.is_realized:
        raise ValueError("scenario has undrawn system vectors; call realize() first")
    T, L = scenario.horizon, scenario.L
    X = rng.standard_normal((T, L))
    noise = np.empty(T)
    change_at = scenario.system_change[0] if scenario.system_change is not None else None
    for (start, stop), (_, spec) in zip(scenario.segment_bounds(), scenario.noise_segments):
        if stop <= start:
            continue
        if spec.kind == GAUSSIAN_SNR and change_at is not None and start < change_at < stop:
            pieces = [(start, change_at), (change_at, stop)]
        else:
            pieces = [(start, stop)]
        for a, b in pieces:
            noise[a:b] = sample_noise(spec, scenario.theta_at(a), rng, b - a)
    y = np.empty(T)
    if T:
        cut = change_at if change_at is not None else T
        y[:cut] = X[:cut] @ scenario.theta_star
        if cut < T:
            y[cut:] = X[cut:] @ scenario.system_change[1]
    y += noise
    return DataStream(X=X, y=y, noise=noise)


def normalized_deviation(theta_star: np.ndarray, theta: np.ndarray) -> float:
    return float(np.linalg.norm(theta_star - theta) / np.linalg.norm(theta_star))
