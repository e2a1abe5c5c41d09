"""Online approximate policy iteration for p-norm selection, and its Monte-Carlo harness."""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import noise
from .bellman import (
    MIN_NORM,
    PROJECTION,
    AS_PRINTED,
    REPRODUCING,
    BellmanOperands,
    alpha_bound,
    build_upsilon,
    eta_min_norm,
    eta_projection,
    solve_xi,
    sup_av_norm,
)
from .dictionary import DELTA_ALD, Dictionary
from .kernel import KernelSpec, embed_flat
from .lmp import LmpConfig, lmp_update, one_step_loss, run_fixed_p_baseline
from .model import Scenario, State, generate_stream, normalized_deviation
from .policy import PolicyConfig, improve_policy, sample_av_flat

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DictionaryConfig:
    delta_ald: float = DELTA_ALD
    max_size: int | None = None
    normalized: bool = True


@dataclass(frozen=True)
class RunConfig:
    scenario: Scenario
    kernel: KernelSpec = field(default_factory=KernelSpec)
    lmp: LmpConfig = field(default_factory=LmpConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    dictionary: DictionaryConfig = field(default_factory=DictionaryConfig)
    eta_rule: str = MIN_NORM
    eta_constraint: str = AS_PRINTED
    replications: int = 100
    baselines: bool = True
    output_dir: str = "results"
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if self.eta_rule not in (MIN_NORM, PROJECTION):
            raise ValueError(f"unknown eta rule {self.eta_rule!r}")
        if self.eta_constraint not in (AS_PRINTED, REPRODUCING):
            raise ValueError(f"unknown eta constraint {self.eta_constraint!r}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.lmp.L != self.scenario.L:
            object.__setattr__(self, "lmp", replace(self.lmp, L=self.scenario.L))

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario.to_dict(),
            "kernel": self.kernel.to_dict(),
            "lmp": self.lmp.to_dict(),
            "policy": self.policy.to_dict(),
            "dictionary": asdict(self.dictionary),
            "eta_rule": self.eta_rule,
            "eta_constraint": self.eta_constraint,
            "replications": self.replications,
            "baselines": self.baselines,
            "output_dir": self.output_dir,
            "n_jobs": self.n_jobs,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        data = dict(data)
        kwargs: dict[str, Any] = {"scenario": Scenario.from_dict(data.pop("scenario"))}
        if "kernel" in data:
            kwargs["kernel"] = KernelSpec.from_dict(data.pop("kernel"))
        if "lmp" in data:
            kwargs["lmp"] = LmpConfig(**data.pop("lmp"))
        if "policy" in data:
            kwargs["policy"] = PolicyConfig.from_dict(data.pop("policy"))
        if "dictionary" in data:
            kwargs["dictionary"] = DictionaryConfig(**data.pop("dictionary"))
        return cls(**kwargs, **data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def scenario_preset(name: str, seed: int = 0) -> Scenario:
    """Named data setups: full-length figure reproductions and the desk-scale profile."""
    L = 10
    if name in ("fig1a", "fig1b", "fig2a", "fig2b"):
        horizon, onset = 40_000, 20_000
    elif name in ("desk", "desk_cauchy", "desk_gauss"):
        horizon, onset = 10_000, 5_000
    else:
        raise ValueError(f"unknown preset {name!r}")
    outliers = noise.GAUSS_LIKE if name in ("fig1a", "fig2a", "desk_gauss") else noise.CAUCHY_LIKE
    change = (onset, None) if name.startswith("fig2") else None
    return Scenario(
        L=L,
        horizon=horizon,
        noise_segments=((0, noise.gaussian(20.0)), (onset, outliers)),
        system_change=change,
        seed=seed,
    )


PRESETS = ("fig1a", "fig1b", "fig2a", "fig2b", "desk", "desk_cauchy", "desk_gauss")


def preset_config(name: str, seed: int = 0, **overrides: Any) -> RunConfig:
    reps = 10 if name.startswith("desk") else 100
    cfg = RunConfig(scenario=scenario_preset(name, seed), replications=reps)
    return replace(cfg, **overrides) if overrides else cfg


@dataclass
class ReplicationTrace:
    """Per-step records of one run of the online algorithm."""

    actions: np.ndarray
    deviation: np.ndarray
    dict_size: np.ndarray
    alpha_bound: np.ndarray
    alpha_used: np.ndarray
    ls_residual: np.ndarray
    baselines: dict[float, np.ndarray] = field(default_factory=dict)
    failed: bool = False
    message: str = ""

    @classmethod
    def empty(cls, horizon: int) -> "ReplicationTrace":
        return cls(
            actions=np.full(horizon, np.nan),
            deviation=np.full(horizon, np.nan),
            dict_size=np.zeros(horizon, dtype=int),
            alpha_bound=np.full(horizon, np.nan),
            alpha_used=np.full(horizon, np.nan),
            ls_residual=np.full(horizon, np.nan),
        )


def replication_streams(seed: int | np.random.SeedSequence) -> dict[str, np.random.Generator]:
    """Independent generators for the data, the averaging sampler, and the heuristic."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    # same children as a first ss.spawn(3), without advancing ss, so reuse is reproducible
    data, av, heur = (
        np.random.SeedSequence(ss.entropy, spawn_key=ss.spawn_key + (i,), pool_size=ss.pool_size) for i in range(3)
    )
    return {"data": np.random.default_rng(data), "av": np.random.default_rng(av), "heuristic": np.random.default_rng(heur)}


def run_api(config: RunConfig, seed: int | np.random.SeedSequence) -> ReplicationTrace:
    """One replication of the online policy-iteration loop.

    Per sample: form the state, sample averaging states, pick p by rollout,
    apply the LMP step, grow the dictionary by ALD, fit the loss coefficients
    and solve for the next Q coefficients.
    """
    rngs = replication_streams(seed)
    scenario = config.scenario.realize(rngs["data"])
    stream = generate_stream(scenario, rngs["data"])
    T, L = scenario.horizon, scenario.L
    rho = config.lmp.rho
    pol = config.policy
    spec = config.kernel
    trace = ReplicationTrace.empty(T)

    d = Dictionary(spec, config.dictionary.delta_ald, config.dictionary.max_size, config.dictionary.normalized)
    theta = np.zeros(L)
    xi = np.zeros(0)
    eta = np.zeros(0)
    previous: float | None = None
    alpha_prev = pol.alpha

    for n in range(T):
        x, y = stream.X[n], float(stream.y[n])
        s_n = State(x, y, theta)
        s_flat = np.concatenate([x, [y], theta])
        av_flat = sample_av_flat(s_flat, pol.N_av, pol.av_sigma, rngs["av"])

        a_n = improve_policy(s_n, xi if len(d) else None, d, pol, previous, rho, alpha_prev, rngs["heuristic"])
        g_n = one_step_loss(s_n, a_n, rho)
        theta = lmp_update(theta, x, y, a_n, rho)

        d.maybe_add_flat(np.vstack([s_flat, av_flat]), a_n)
        n_b = len(d)
        n_av = min(pol.N_av, n_b)
        av_used = av_flat[:n_av]

        E_av = embed_flat(av_used, a_n, spec)
        K_av_b = d.kernel_vectors(E_av).T
        k_n = d.kernel_vectors(embed_flat(s_flat, a_n, spec))[:, 0]
        if config.eta_rule == MIN_NORM:
            eta = eta_min_norm(d.K, k_n, g_n, config.eta_constraint, d.K_inv)
        else:
            eta = eta_projection(d.K, k_n, g_n, eta, config.eta_constraint, d.K_inv)

        bound = alpha_bound(d.K[:n_av, :n_av], sup_av_norm(av_used, pol.action_grid, spec))
        alpha_n = min(pol.alpha, bound)
        ops = BellmanOperands(eta=eta, upsilon=build_upsilon(n_av, n_b), K_av_b=K_av_b, alpha=alpha_n)
        try:
            xi_next, resid = solve_xi(ops)
        except np.linalg.LinAlgError as exc:
            xi_next, resid = None, math.nan
            trace.message = f"least-squares solve failed at step {n}: {exc}"
        if xi_next is None or not np.all(np.isfinite(xi_next)):
            trace.failed = True
            trace.message = trace.message or f"non-finite Q coefficients at step {n}"
            log.warning(trace.message)
            _truncate(trace, n)
            return trace
        xi = xi_next

        trace.actions[n] = a_n
        trace.deviation[n] = normalized_deviation(scenario.theta_at(n), theta)
        trace.dict_size[n] = n_b
        trace.alpha_bound[n] = bound
        trace.alpha_used[n] = alpha_n
        trace.ls_residual[n] = resid
        previous = a_n
        alpha_prev = alpha_n

    if config.baselines:
        trace.baselines = {p: run_fixed_p_baseline(scenario, p, rho, stream=stream) for p in pol.action_grid}
    return trace


def _truncate(trace: ReplicationTrace, n: int) -> None:
    for name in ("actions", "deviation", "alpha_bound", "alpha_used", "ls_residual"):
        setattr(trace, name, getattr(trace, name)[:n])
    trace.dict_size = trace.dict_size[:n]


@dataclass
class RunResult:
    """Replication-averaged outputs of an experiment."""

    deviation_mean: np.ndarray
    action_histogram: list[dict[float, float]]
    dictionary_sizes: np.ndarray
    alpha_bound_trace: np.ndarray
    action_grid: tuple[float, ...] = ()
    segments: list[tuple[int, int]] = field(default_factory=list)
    baseline_means: dict[float, np.ndarray] = field(default_factory=dict)
    actions: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))
    replications: int = 0
    failures: int = 0
    failure_messages: list[str] = field(default_factory=list)

    def action_frequencies(self, start: int, stop: int) -> dict[float, float]:
        """Pooled action frequencies over steps ``[start, stop)`` of all replications."""
        return _frequencies(self.actions[:, start:stop], self.action_grid)


def _frequencies(actions: np.ndarray, grid: tuple[float, ...]) -> dict[float, float]:
    total = actions.size
    if total == 0:
        return {a: 0.0 for a in grid}
    counts = {a: int(np.count_nonzero(actions == a)) for a in grid}
    return {a: c / total for a, c in counts.items()}


def replication_seeds(master_seed: int, replications: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(master_seed).spawn(replications)


def _run_one(args: tuple[RunConfig, np.random.SeedSequence]) -> ReplicationTrace:
    return run_api(*args)


def average_traces(traces: list[ReplicationTrace], config: RunConfig) -> RunResult:
    """Uniform average of complete replications; failed ones are counted and excluded."""
    ok = [t for t in traces if not t.failed]
    failures = [t.message for t in traces if t.failed]
    if not ok:
        raise RuntimeError(f"all {len(traces)} replications failed: {failures[:3]}")
    grid = config.policy.action_grid
    actions = np.stack([t.actions for t in ok])
    segments = config.scenario.segment_bounds()
    baseline_means = {}
    if ok[0].baselines:
        baseline_means = {p: np.mean(np.stack([t.baselines[p] for t in ok]), axis=0) for p in ok[0].baselines}
    return RunResult(
        deviation_mean=np.mean(np.stack([t.deviation for t in ok]), axis=0),
        action_histogram=[_frequencies(actions[:, a:b], grid) for a, b in segments],
        dictionary_sizes=np.mean(np.stack([t.dict_size for t in ok]).astype(float), axis=0),
        alpha_bound_trace=np.mean(np.stack([t.alpha_bound for t in ok]), axis=0),
        action_grid=grid,
        segments=segments,
        baseline_means=baseline_means,
        actions=actions,
        replications=len(ok),
        failures=len(failures),
        failure_messages=failures,
    )


def run_experiment(config: RunConfig, progress: bool = False) -> RunResult:
    """Run every replication (in parallel when ``n_jobs > 1``) and average."""
    seeds = replication_seeds(config.scenario.seed, config.replications)
    jobs = [(config, s) for s in seeds]
    if config.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=config.n_jobs) as pool:
            traces = list(pool.map(_run_one, jobs))
    else:
        traces = []
        for i, job in enumerate(jobs):
            traces.append(_run_one(job))
            if progress:
                log.info("replication %d/%d done", i + 1, len(jobs))
    result = average_traces(traces, config)
    if result.failures:
        log.warning("%d of %d replications failed", result.failures, config.replications)
    return result


# output files

STEP_COLUMNS = ("step", "deviation_mean", "dict_size_mean", "alpha_bound_mean")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def emit_outputs(result: RunResult, config: RunConfig, out_dir: str | Path | None = None, plot: bool = True) -> dict[str, Path]:
    """Write the per-step CSV, the per-segment action CSV, baselines, and the plot."""
    out = Path(out_dir if out_dir is not None else config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    paths = {
        "steps": out / "steps.csv",
        "actions": out / "actions.csv",
        "baselines": out / "baselines.csv",
        "config": out / "config.json",
    }
    with open(paths["steps"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STEP_COLUMNS)
        for n in range(len(result.deviation_mean)):
            w.writerow(
                [n, _fmt(result.deviation_mean[n]), _fmt(result.dictionary_sizes[n]), _fmt(result.alpha_bound_trace[n])]
            )
    with open(paths["actions"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["segment", "start", "stop", "p", "frequency"])
        for i, ((a, b), hist) in enumerate(zip(result.segments, result.action_histogram)):
            for p, f in hist.items():
                w.writerow([i, a, b, _fmt(p), _fmt(f)])
    write_baselines_csv(result.baseline_means, paths["baselines"])
    config.save(paths["config"])
    if plot:
        paths["plot"] = plot_deviation(paths["steps"], paths["baselines"], out / "deviation.png")
    return paths


def write_baselines_csv(means: dict[float, np.ndarray], path: str | Path) -> Path:
    """One column per fixed p, one row per step."""
    ps = sorted(means)
    horizon = len(means[ps[0]]) if ps else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step"] + [f"p={_fmt(p)}" for p in ps])
        for n in range(horizon):
            w.writerow([n] + [_fmt(means[p][n]) for p in ps])
    return Path(path)


def read_steps_csv(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = {c: np.array([float(r[c]) for r in rows]) for c in STEP_COLUMNS}
    cols["step"] = cols["step"].astype(int)
    return cols


def read_baselines_csv(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        names = [c for c in (reader.fieldnames or []) if c != "step"]
    return {c: np.array([float(r[c]) for r in rows]) for c in names}


def plot_deviation(steps_csv: str | Path, baselines_csv: str | Path | None, out_path: str | Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    steps = read_steps_csv(steps_csv)
    fig, ax = plt.subplots(figsize=(6, 4))
    if baselines_csv is not None and Path(baselines_csv).exists():
        for name, curve in read_baselines_csv(baselines_csv).items():
            ax.semilogy(curve, lw=0.8, label=f"LMP {name}")
    ax.semilogy(steps["step"], steps["deviation_mean"], "k", lw=1.5, label="rollout API")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$\|\theta_* - \theta_n\| / \|\theta_*\|$")
    ax.legend(fontsize=7)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def run_baseline_sweep(config: RunConfig) -> dict[float, np.ndarray]:
    """Replication-averaged fixed-p LMP curves on the same data streams as :func:`run_api`."""
    seeds = replication_seeds(config.scenario.seed, config.replications)
    curves: dict[float, list[np.ndarray]] = {p: [] for p in config.policy.action_grid}
    for s in seeds:
        rng = replication_streams(s)["data"]
        scenario = config.scenario.realize(rng)
        stream = generate_stream(scenario, rng)
        for p in config.policy.action_grid:
            curves[p].append(run_fixed_p_baseline(scenario, p, config.lmp.rho, stream=stream))
    return {p: np.mean(np.stack(c), axis=0) for p, c in curves.items()}



# comparison methods

class BaselineAdapter:
    """Interface for a comparison method run on the same data stream as the agent."""

    name = "baseline"

    def run(self, scenario: Scenario, stream, rho: float) -> np.ndarray:
        """Normalized deviation trace of length ``scenario.horizon``."""
        raise NotImplementedError


@dataclass
class FixedPBaseline(BaselineAdapter):
    p: float

    @property
    def name(self) -> str:  # type: ignore[override]
        return f"lmp_p{self.p:g}"

    def run(self, scenario: Scenario, stream, rho: float) -> np.ndarray:
        return run_fixed_p_baseline(scenario, self.p, rho, stream=stream)


class CacRlpBaseline(BaselineAdapter):
    """Slot for the actor-critic p-selection comparison method (not provided)."""

    name = "cac_rlp"


class KlspiBaseline(BaselineAdapter):
    """Slot for kernel least-squares policy iteration (not provided)."""

    name = "klspi"
