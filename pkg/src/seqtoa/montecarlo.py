"""Seeded Monte-Carlo experiment schemes and their aggregation.

Three schemes mirror the standard evaluation protocol:

* ``noise_sweep``   - fixed topology, sweep the agent-uncertainty level
  sigma_s^2 (dB);
* ``ltco_sweep``    - fixed topology, sweep the target clock offset (meters,
  range-equivalent) at a fixed agent-uncertainty level;
* ``random_topology`` - redraw agents and target every trial at a fixed
  agent-uncertainty level, collect the error CDF.

Reproducibility contract: trial ``i`` uses ``seed_i = base_seed XOR i``; a
``numpy.random.SeedSequence(seed_i)`` is spawned into three independent
streams used, in order, for scenario materialization, frame noise, and
estimator-init perturbation.  Identical specs therefore produce bit-identical
results within one package version.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import analysis, baselines, estimator
from .errors import EstimationError
from .model import (
    C_LIGHT,
    AgentTruth,
    NoiseSpec,
    Scenario,
    TargetState,
    simulate_frame,
)

SCHEMES = ("noise_sweep", "ltco_sweep", "random_topology")
ESTIMATOR_IDS = ("proposed", "tswls_static", "mle")

_BLOCKS = ("position", "velocity", "offset", "skew")
_BLOCK_SLICES = {
    "position": slice(0, 2),
    "velocity": slice(2, 4),
    "offset": slice(4, 5),
    "skew": slice(5, 6),
}


@dataclass(frozen=True)
class TopologyBounds:
    """Draw ranges for the random-topology scheme (meters, m/s, ns, ppm)."""

    agent_xy: tuple[float, float] = (0.0, 50.0)
    target_xy: tuple[float, float] = (-50.0, 100.0)
    velocity: tuple[float, float] = (-5.0, 5.0)
    agent_offset_ns: tuple[float, float] = (-10.0, 10.0)
    target_offset_ns: tuple[float, float] = (-10.0, 10.0)
    skew_ppm: tuple[float, float] = (-20.0, 20.0)
    n_agents: int = 10
    slot_interval: float = 0.05
    sigma_tau_sq_db: float = -30.0
    sigma_s_sq_db: float = -20.5
    agent_sigma_halfwidth_db: float = 5.0

    def __post_init__(self):
        for name in ("agent_xy", "target_xy", "velocity", "agent_offset_ns", "target_offset_ns", "skew_ppm"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} bounds must be well-ordered, got {(lo, hi)}")
        if self.n_agents < 1 or self.slot_interval <= 0:
            raise ValueError("need n_agents >= 1 and slot_interval > 0")


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: scheme, trial count, seed, sweep axis, estimators.

    ``topology`` is a fixed :class:`Scenario` for the sweep schemes (defaults
    to the packaged fixed topology) or :class:`TopologyBounds` for the
    random-topology scheme.
    """

    scheme: str
    n_trials: int
    base_seed: int
    sweep_values: tuple[float, ...]
    estimators: tuple[str, ...] = ("proposed",)
    topology: Scenario | TopologyBounds | None = None
    sigma_tau_sq_db: float = -30.0
    sigma_s_sq_db: float = -20.5
    agent_sigma_halfwidth_db: float = 5.0
    target_offset_ns: float = 10.0
    mle_init_sigma: float = 1.0
    mle_max_iters: int = 50

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if len(self.sweep_values) == 0:
            raise ValueError("sweep_values must be non-empty")
        for e in self.estimators:
            if e not in ESTIMATOR_IDS:
                raise ValueError(f"unknown estimator id {e!r}; known: {ESTIMATOR_IDS}")
        object.__setattr__(self, "sweep_values", tuple(float(v) for v in self.sweep_values))
        object.__setattr__(self, "estimators", tuple(self.estimators))


@dataclass(frozen=True, eq=False)
class TrialStats:
    """Aggregates of one (sweep value, estimator) cell.

    MSE entries average squared errors over successful trials only; divergent
    or failed trials are excluded from the averages and counted in
    ``divergence_count``.  CRLB traces average over all trials of the sweep
    cell (the bound is a property of the scenario, not of any estimator).
    """

    mse_position: float
    mse_velocity: float
    mse_offset: float
    mse_skew: float
    bias: np.ndarray  # (6,)
    crlb_trace_position: float
    crlb_trace_velocity: float
    crlb_trace_offset: float
    crlb_trace_skew: float
    cdf_samples: np.ndarray  # per-trial position squared errors, trial order
    divergence_count: int
    n_success: int
    n_trials: int

    def mse(self, block: str) -> float:
        return getattr(self, f"mse_{block}")

    def crlb_trace(self, block: str) -> float:
        return getattr(self, f"crlb_trace_{block}")

    def bias_norm(self, block: str) -> float:
        return float(np.linalg.norm(self.bias[_BLOCK_SLICES[block]]))


def fixed_topology() -> Scenario:
    """The versioned fixed scenario shipped with the package (M = 10)."""
    from .serialize import scenario_from_dict

    text = resources.files("seqtoa.data").joinpath("fixed_topology_m10.json").read_text()
    return scenario_from_dict(json.loads(text))


def sample_random_topology(bounds: TopologyBounds, rng: np.random.Generator) -> Scenario:
    """Draw one random scenario.

    Draw order (fixed for reproducibility): agent positions, agent clock
    offsets, target position, target velocity, target offset, target skew,
    per-agent variances.
    """
    M = bounds.n_agents
    t = bounds.slot_interval * np.arange(M)

    pos = rng.uniform(bounds.agent_xy[0], bounds.agent_xy[1], size=(M, 2))
    T_m = rng.uniform(bounds.agent_offset_ns[0], bounds.agent_offset_ns[1], size=M) * 1e-9 * C_LIGHT
    target_p = rng.uniform(bounds.target_xy[0], bounds.target_xy[1], size=2)
    target_v = rng.uniform(bounds.velocity[0], bounds.velocity[1], size=2)
    target_T = rng.uniform(bounds.target_offset_ns[0], bounds.target_offset_ns[1]) * 1e-9 * C_LIGHT
    target_omega = rng.uniform(bounds.skew_ppm[0], bounds.skew_ppm[1]) * 1e-6 * C_LIGHT
    sigma_db = rng.uniform(
        bounds.sigma_s_sq_db - bounds.agent_sigma_halfwidth_db,
        bounds.sigma_s_sq_db + bounds.agent_sigma_halfwidth_db,
        size=M,
    )

    agents = tuple(AgentTruth(p_m=pos[m], T_m=T_m[m], t_m=t[m]) for m in range(M))
    noise = NoiseSpec.from_db(bounds.sigma_tau_sq_db, sigma_db)
    return Scenario(
        agents=agents,
        target=TargetState(p=target_p, v=target_v, T=target_T, omega=target_omega),
        noise=noise,
    )


def _materialize_scenario(spec: ExperimentSpec, sweep_value: float, rng: np.random.Generator) -> Scenario:
    """Per-trial scenario for one sweep point.

    Fixed-topology schemes keep agent geometry/offsets and the target's
    position/velocity from the base scenario but redraw the target clock
    offset (uniform for non-LTCO; the sweep value itself for the LTCO sweep),
    the target skew, and the per-agent variances.
    """
    if spec.scheme == "random_topology":
        bounds = spec.topology if isinstance(spec.topology, TopologyBounds) else TopologyBounds()
        bounds = TopologyBounds(
            agent_xy=bounds.agent_xy,
            target_xy=bounds.target_xy,
            velocity=bounds.velocity,
            agent_offset_ns=bounds.agent_offset_ns,
            target_offset_ns=bounds.target_offset_ns,
            skew_ppm=bounds.skew_ppm,
            n_agents=bounds.n_agents,
            slot_interval=bounds.slot_interval,
            sigma_tau_sq_db=spec.sigma_tau_sq_db,
            sigma_s_sq_db=sweep_value,
            agent_sigma_halfwidth_db=spec.agent_sigma_halfwidth_db,
        )
        return sample_random_topology(bounds, rng)

    base = spec.topology if isinstance(spec.topology, Scenario) else fixed_topology()
    M = base.n_agents

    if spec.scheme == "noise_sweep":
        sigma_s_sq_db = sweep_value
        target_T = rng.uniform(-spec.target_offset_ns, spec.target_offset_ns) * 1e-9 * C_LIGHT
    else:  # ltco_sweep: sweep value is the offset in range-equivalent meters
        sigma_s_sq_db = spec.sigma_s_sq_db
        target_T = float(sweep_value)

    target_omega = rng.uniform(-20.0, 20.0) * 1e-6 * C_LIGHT
    sigma_db = rng.uniform(
        sigma_s_sq_db - spec.agent_sigma_halfwidth_db,
        sigma_s_sq_db + spec.agent_sigma_halfwidth_db,
        size=M,
    )
    target = TargetState(p=base.target.p, v=base.target.v, T=target_T, omega=target_omega)
    noise = NoiseSpec.from_db(spec.sigma_tau_sq_db, sigma_db)
    return Scenario(agents=base.agents, target=target, noise=noise)


def _run_one_estimator(est_id: str, frame, scenario: Scenario, rng: np.random.Generator, spec: ExperimentSpec):
    """Run one estimator on one frame; return its 6-state or None on failure.

    The MLE consumes its init draw from ``rng`` even on failure so the stream
    stays aligned across estimator outcomes.
    """
    try:
        if est_id == "proposed":
            report = estimator.estimate(frame)
            x = report.x_hat.as_vector()
        elif est_id == "tswls_static":
            res = baselines.tswls_static_estimate(frame)
            if not res.success:
                return None
            x = np.array([res.position[0], res.position[1], 0.0, 0.0, res.offset, 0.0])
        elif est_id == "mle":
            perturb = rng.normal(0.0, spec.mle_init_sigma, size=6)
            cfg = baselines.MleConfig(
                init=TargetState.from_vector(scenario.target.as_vector() + perturb),
                max_iters=spec.mle_max_iters,
                init_perturbation_sigma=spec.mle_init_sigma,
            )
            report = baselines.mle_estimate(frame, cfg)
            if report.diverged:
                return None
            x = report.x_hat.as_vector()
        else:  # pragma: no cover - spec validation rejects unknown ids
            raise ValueError(est_id)
    except EstimationError:
        return None
    if not np.all(np.isfinite(x)):
        return None
    return x


def _run_trial(spec: ExperimentSpec, sweep_value: float, trial: int):
    """One trial: returns (per-estimator error 6-vectors or None, CRLB traces or None)."""
    seed_i = spec.base_seed ^ trial
    streams = np.random.SeedSequence(seed_i).spawn(3)
    rng_scenario = np.random.default_rng(streams[0])
    frame_seed = int(streams[1].generate_state(1, np.uint64)[0])
    rng_est = np.random.default_rng(streams[2])

    scenario = _materialize_scenario(spec, sweep_value, rng_scenario)
    frame = simulate_frame(scenario, frame_seed)
    truth = scenario.target.as_vector()

    errors = {}
    for est_id in spec.estimators:
        x = _run_one_estimator(est_id, frame, scenario, rng_est, spec)
        errors[est_id] = None if x is None else x - truth

    try:
        crlb = analysis.crlb_target(scenario).crlb_x
        diag = np.diag(crlb)
        traces = (diag[0] + diag[1], diag[2] + diag[3], diag[4], diag[5])
    except EstimationError:
        traces = None
    return errors, traces


def run_trials(spec: ExperimentSpec, threads: int = 1) -> dict[tuple[float, str], TrialStats]:
    """Run the experiment, one cell of :class:`TrialStats` per
    (sweep value, estimator id).

    Per-trial estimator failures are recorded and excluded from the averages;
    they never abort the sweep.  Trials are independent and may run on a
    thread pool; results are reduced in trial order, so the aggregation is
    deterministic regardless of ``threads``.
    """
    results: dict[tuple[float, str], TrialStats] = {}
    for sweep_value in spec.sweep_values:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                trials = list(pool.map(lambda i: _run_trial(spec, sweep_value, i), range(spec.n_trials)))
        else:
            trials = [_run_trial(spec, sweep_value, i) for i in range(spec.n_trials)]

        crlb_rows = np.array([t for _, t in trials if t is not None], dtype=float)
        crlb_mean = crlb_rows.mean(axis=0) if crlb_rows.size else np.full(4, np.nan)

        for est_id in spec.estimators:
            errs = [e[est_id] for e, _ in trials]
            ok = np.array([e for e in errs if e is not None], dtype=float).reshape(-1, 6)
            n_success = ok.shape[0]
            if n_success:
                sq = ok**2
                mse = (
                    float(sq[:, 0:2].sum(axis=1).mean()),
                    float(sq[:, 2:4].sum(axis=1).mean()),
                    float(sq[:, 4].mean()),
                    float(sq[:, 5].mean()),
                )
                bias = ok.mean(axis=0)
                cdf = sq[:, 0:2].sum(axis=1)
            else:
                mse = (np.nan,) * 4
                bias = np.full(6, np.nan)
                cdf = np.empty(0)
            results[(sweep_value, est_id)] = TrialStats(
                mse_position=mse[0],
                mse_velocity=mse[1],
                mse_offset=mse[2],
                mse_skew=mse[3],
                bias=bias,
                crlb_trace_position=float(crlb_mean[0]),
                crlb_trace_velocity=float(crlb_mean[1]),
                crlb_trace_offset=float(crlb_mean[2]),
                crlb_trace_skew=float(crlb_mean[3]),
                cdf_samples=cdf,
                divergence_count=spec.n_trials - n_success,
                n_success=n_success,
                n_trials=spec.n_trials,
            )
    return results


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_sweep_csv(results: dict[tuple[float, str], TrialStats], spec: ExperimentSpec, path) -> None:
    """Sweep table: one row per (sweep value, estimator, state block)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep_value", "estimator", "block", "mse", "bias_norm", "crlb", "n_success", "n_diverged"])
        for sweep_value in spec.sweep_values:
            for est_id in spec.estimators:
                st = results[(sweep_value, est_id)]
                for block in _BLOCKS:
                    w.writerow(
                        [
                            _fmt(sweep_value),
                            est_id,
                            block,
                            _fmt(st.mse(block)),
                            _fmt(st.bias_norm(block)),
                            _fmt(st.crlb_trace(block)),
                            st.n_success,
                            st.divergence_count,
                        ]
                    )


def write_cdf_csv(results: dict[tuple[float, str], TrialStats], spec: ExperimentSpec, path) -> None:
    """Empirical CDF of per-trial position squared errors.

    Only meaningful for single-sweep-value experiments (the schema has no
    sweep column); raises otherwise.
    """
    if len(spec.sweep_values) != 1:
        raise ValueError("CDF output is defined for single-sweep-value experiments")
    sweep_value = spec.sweep_values[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["estimator", "squared_error", "cdf"])
        for est_id in spec.estimators:
            samples = np.sort(results[(sweep_value, est_id)].cdf_samples)
            n = samples.size
            for i, s in enumerate(samples):
                w.writerow([est_id, _fmt(float(s)), _fmt((i + 1) / n)])
