"""JSON (de)serialization of the public file formats.

Schemas (all floats in SI units per the package conventions; variances in dB
re 1 m^2 where the key says so):

Scenario::

    {"version": 1,
     "agents": [{"p": [x, y], "T": m, "t": s}, ...],
     "target": {"p": [x, y], "v": [vx, vy], "T": m, "omega": m/s},
     "noise": {"sigma_tau_sq_db": f,
               "agent_sigma_sq_db": [f, ...]            # concrete, or
                                  | {"center_db": f, "halfwidth_db": f}}}

The sampled form of ``agent_sigma_sq_db`` needs an RNG at load time.

Frame::

    {"records": [{"t": s, "tau_tilde": m, "p_hat": [x, y], "T_hat": m}, ...],
     "noise": {"sigma_tau_sq_db": f, "agent_sigma_sq_db": [f, ...]}}

Estimate report (flat)::

    {"estimator": id, "px": m, "py": m, "vx": m/s, "vy": m/s, "T": m,
     "omega": m/s, "iterations": n, "converged": b, "diverged": b,
     "cond_estimate": f}

Experiment spec: see :func:`experiment_spec_from_dict`.
"""

from __future__ import annotations

import numpy as np

from .baselines import StaticTswlsResult
from .estimator import EstimateReport
from .model import (
    AgentBroadcast,
    AgentTruth,
    FrameRecord,
    NoiseSpec,
    ObservedFrame,
    Scenario,
    TargetState,
    variance_to_db,
)
from .montecarlo import ExperimentSpec, TopologyBounds


class SchemaError(Exception):
    """Input document does not match the expected schema."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _get(d: dict, key: str, path: str):
    if not isinstance(d, dict):
        raise SchemaError(path, f"expected an object, got {type(d).__name__}")
    if key not in d:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return d[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected a number, got {value!r}")
    return float(value)


def _pair(value, path: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise SchemaError(path, f"expected a 2-element array, got {value!r}")
    return [_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]")]


def _number_list(value, path: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) == 0:
        raise SchemaError(path, "expected a non-empty array of numbers")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


# --- noise ------------------------------------------------------------------


def _noise_from_dict(d, n_agents: int, path: str, rng: np.random.Generator | None = None) -> NoiseSpec:
    sigma_tau_sq_db = _number(_get(d, "sigma_tau_sq_db", path), f"{path}.sigma_tau_sq_db")
    agent = _get(d, "agent_sigma_sq_db", path)
    apath = f"{path}.agent_sigma_sq_db"
    if isinstance(agent, dict):
        center = _number(_get(agent, "center_db", apath), f"{apath}.center_db")
        halfwidth = _number(_get(agent, "halfwidth_db", apath), f"{apath}.halfwidth_db")
        if rng is None:
            raise SchemaError(apath, "sampled agent variances need an RNG/seed to materialize")
        agent_db = rng.uniform(center - halfwidth, center + halfwidth, size=n_agents)
    else:
        agent_db = np.asarray(_number_list(agent, apath))
        if agent_db.size != n_agents:
            raise SchemaError(apath, f"expected {n_agents} entries, got {agent_db.size}")
    return NoiseSpec.from_db(sigma_tau_sq_db, agent_db)


def _noise_to_dict(noise: NoiseSpec) -> dict:
    agent_db = [variance_to_db(noise.agent_block(m)[0, 0]) for m in range(noise.n_agents)]
    return {
        "sigma_tau_sq_db": variance_to_db(noise.C_tau[0, 0]),
        "agent_sigma_sq_db": agent_db,
    }


# --- scenario ----------------------------------------------------------------


def scenario_from_dict(d: dict, rng: np.random.Generator | None = None) -> Scenario:
    agents_raw = _get(d, "agents", "scenario")
    if not isinstance(agents_raw, list) or not agents_raw:
        raise SchemaError("scenario.agents", "expected a non-empty array")
    agents = []
    for i, a in enumerate(agents_raw):
        path = f"scenario.agents[{i}]"
        agents.append(
            AgentTruth(
                p_m=_pair(_get(a, "p", path), f"{path}.p"),
                T_m=_number(_get(a, "T", path), f"{path}.T"),
                t_m=_number(_get(a, "t", path), f"{path}.t"),
            )
        )
    traw = _get(d, "target", "scenario")
    target = TargetState(
        p=_pair(_get(traw, "p", "scenario.target"), "scenario.target.p"),
        v=_pair(_get(traw, "v", "scenario.target"), "scenario.target.v"),
        T=_number(_get(traw, "T", "scenario.target"), "scenario.target.T"),
        omega=_number(_get(traw, "omega", "scenario.target"), "scenario.target.omega"),
    )
    noise = _noise_from_dict(_get(d, "noise", "scenario"), len(agents), "scenario.noise", rng)
    return Scenario(agents=tuple(agents), target=target, noise=noise)


def scenario_to_dict(s: Scenario) -> dict:
    return {
        "version": 1,
        "agents": [{"p": list(a.p_m), "T": a.T_m, "t": a.t_m} for a in s.agents],
        "target": {
            "p": list(s.target.p),
            "v": list(s.target.v),
            "T": s.target.T,
            "omega": s.target.omega,
        },
        "noise": _noise_to_dict(s.noise),
    }


# --- frame -------------------------------------------------------------------


def frame_from_dict(d: dict) -> ObservedFrame:
    recs_raw = _get(d, "records", "frame")
    if not isinstance(recs_raw, list) or not recs_raw:
        raise SchemaError("frame.records", "expected a non-empty array")
    records = []
    for i, r in enumerate(recs_raw):
        path = f"frame.records[{i}]"
        records.append(
            FrameRecord(
                t_m=_number(_get(r, "t", path), f"{path}.t"),
                tau_tilde_m=_number(_get(r, "tau_tilde", path), f"{path}.tau_tilde"),
                broadcast=AgentBroadcast(
                    p_hat_m=_pair(_get(r, "p_hat", path), f"{path}.p_hat"),
                    T_hat_m=_number(_get(r, "T_hat", path), f"{path}.T_hat"),
                ),
            )
        )
    noise = _noise_from_dict(_get(d, "noise", "frame"), len(records), "frame.noise")
    return ObservedFrame(records=tuple(records), noise=noise)


def frame_to_dict(f: ObservedFrame) -> dict:
    return {
        "records": [
            {
                "t": r.t_m,
                "tau_tilde": r.tau_tilde_m,
                "p_hat": list(r.broadcast.p_hat_m),
                "T_hat": r.broadcast.T_hat_m,
            }
            for r in f.records
        ],
        "noise": _noise_to_dict(f.noise),
    }


# --- reports -----------------------------------------------------------------


def report_to_dict(report: EstimateReport) -> dict:
    x = report.x_hat.as_vector()
    return {
        "estimator": report.estimator_id,
        "px": x[0],
        "py": x[1],
        "vx": x[2],
        "vy": x[3],
        "T": x[4],
        "omega": x[5],
        "iterations": report.iterations,
        "converged": report.converged,
        "diverged": report.diverged,
        "cond_estimate": report.cond_estimate,
    }


def static_result_to_dict(res: StaticTswlsResult) -> dict:
    out = {"estimator": res.estimator_id, "success": res.success}
    if res.success:
        out.update({"px": res.position[0], "py": res.position[1], "T": res.offset})
    else:
        out["message"] = res.message
    return out


# --- experiment specs ----------------------------------------------------------


def experiment_spec_from_dict(d: dict, rng: np.random.Generator | None = None) -> ExperimentSpec:
    """Parse an experiment document.

    ``topology`` may be the string ``"fixed"`` (packaged fixed scenario, the
    default), an inline scenario object, or ``{"random": {...bounds...}}``.
    """
    scheme = _get(d, "scheme", "experiment")
    if not isinstance(scheme, str):
        raise SchemaError("experiment.scheme", "expected a string")
    n_trials = _get(d, "n_trials", "experiment")
    if isinstance(n_trials, bool) or not isinstance(n_trials, int):
        raise SchemaError("experiment.n_trials", "expected an integer")
    base_seed = _get(d, "base_seed", "experiment")
    if isinstance(base_seed, bool) or not isinstance(base_seed, int):
        raise SchemaError("experiment.base_seed", "expected an integer")
    sweep_values = _number_list(_get(d, "sweep_values", "experiment"), "experiment.sweep_values")
    estimators = _get(d, "estimators", "experiment")
    if not isinstance(estimators, list) or not all(isinstance(e, str) for e in estimators):
        raise SchemaError("experiment.estimators", "expected an array of estimator ids")

    topology = None
    if "topology" in d:
        traw = d["topology"]
        if traw == "fixed" or traw is None:
            topology = None
        elif isinstance(traw, dict) and "random" in traw:
            braw = traw["random"] or {}
            if not isinstance(braw, dict):
                raise SchemaError("experiment.topology.random", "expected an object of bounds")
            kwargs = {}
            for key in ("agent_xy", "target_xy", "velocity", "agent_offset_ns", "target_offset_ns", "skew_ppm"):
                if key in braw:
                    kwargs[key] = tuple(_pair(braw[key], f"experiment.topology.random.{key}"))
            for key in ("n_agents",):
                if key in braw:
                    kwargs[key] = int(braw[key])
            for key in ("slot_interval",):
                if key in braw:
                    kwargs[key] = _number(braw[key], f"experiment.topology.random.{key}")
            topology = TopologyBounds(**kwargs)
        elif isinstance(traw, dict):
            topology = scenario_from_dict(traw, rng)
        else:
            raise SchemaError("experiment.topology", f"expected 'fixed', a scenario, or {{'random': ...}}; got {traw!r}")

    kwargs = {}
    for key in ("sigma_tau_sq_db", "sigma_s_sq_db", "agent_sigma_halfwidth_db", "target_offset_ns", "mle_init_sigma"):
        if key in d:
            kwargs[key] = _number(d[key], f"experiment.{key}")
    if "mle_max_iters" in d:
        kwargs["mle_max_iters"] = int(d["mle_max_iters"])

    try:
        return ExperimentSpec(
            scheme=scheme,
            n_trials=n_trials,
            base_seed=base_seed,
            sweep_values=tuple(sweep_values),
            estimators=tuple(estimators),
            topology=topology,
            **kwargs,
        )
    except ValueError as exc:
        raise SchemaError("experiment", str(exc)) from None


def experiment_spec_to_dict(spec: ExperimentSpec) -> dict:
    out = {
        "scheme": spec.scheme,
        "n_trials": spec.n_trials,
        "base_seed": spec.base_seed,
        "sweep_values": list(spec.sweep_values),
        "estimators": list(spec.estimators),
        "sigma_tau_sq_db": spec.sigma_tau_sq_db,
        "sigma_s_sq_db": spec.sigma_s_sq_db,
        "agent_sigma_halfwidth_db": spec.agent_sigma_halfwidth_db,
        "target_offset_ns": spec.target_offset_ns,
        "mle_init_sigma": spec.mle_init_sigma,
        "mle_max_iters": spec.mle_max_iters,
    }
    if spec.topology is None:
        out["topology"] = "fixed"
    elif isinstance(spec.topology, TopologyBounds):
        b = spec.topology
        out["topology"] = {
            "random": {
                "agent_xy": list(b.agent_xy),
                "target_xy": list(b.target_xy),
                "velocity": list(b.velocity),
                "agent_offset_ns": list(b.agent_offset_ns),
                "target_offset_ns": list(b.target_offset_ns),
                "skew_ppm": list(b.skew_ppm),
                "n_agents": b.n_agents,
                "slot_interval": b.slot_interval,
            }
        }
    else:
        out["topology"] = scenario_to_dict(spec.topology)
    return out
