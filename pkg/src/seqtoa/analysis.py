"""Estimation-theoretic analysis: CRLB under anchor uncertainty and the
estimator's predicted covariance.

The joint unknowns are the 6-dimensional target state and the 3M agent
nuisance parameters.  The Fisher information splits into blocks

    R1 = Hx^T C_tau^-1 Hx          (target block)
    R2 = Hx^T C_tau^-1 Hb          (cross block)
    R3 = Hb^T C_tau^-1 Hb + C_beta^-1   (agent block)

where ``Hx`` and ``Hb`` stack the TOA gradients with respect to the target
state and the agent parameters.  Marginalizing the agents by Schur complement
gives the target bound ``CRLB(x) = (R1 - R2 R3^-1 R2^T)^-1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConditioningError, DegenerateGeometryError, NotPositiveDefiniteError
from .estimator import _design_arrays, build_error_model, theta_jacobian
from .model import AgentTruth, ObservedFrame, Scenario, TargetState, exact_frame

_COINCIDENT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FimBlocks:
    """Fisher information blocks of the joint target/agent problem."""

    R1: np.ndarray  # (6, 6)
    R2: np.ndarray  # (6, 3M)
    R3: np.ndarray  # (3M, 3M)


@dataclass(frozen=True, eq=False)
class CrlbResult:
    """Target-state lower bound plus the full joint FIM for diagnostics."""

    crlb_x: np.ndarray  # (6, 6)
    full_fim: np.ndarray  # (6+3M, 6+3M)


def toa_gradients(x: TargetState, agent: AgentTruth) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of one noise-free TOA.

    Returns the row 6-vector ``[rho, t_m*rho, 1, t_m]`` (derivative with
    respect to the target state) and the row 3-vector ``[-rho, -1]``
    (derivative with respect to the agent's position/offset), where ``rho``
    is the unit vector from the agent to the target's slot-time position.

    Raises
    ------
    DegenerateGeometryError
        If target and agent coincide at the slot time (unit vector undefined).
    """
    u = x.p + x.v * agent.t_m - agent.p_m
    r = float(np.linalg.norm(u))
    if r <= _COINCIDENT_TOL * (1.0 + float(np.linalg.norm(agent.p_m))):
        raise DegenerateGeometryError(
            f"target coincides with agent at slot time {agent.t_m}: range {r:.3e}"
        )
    rho = u / r
    grad_x = np.concatenate([rho, agent.t_m * rho, [1.0, agent.t_m]])
    grad_beta = np.concatenate([-rho, [-1.0]])
    return grad_x, grad_beta


def fim_blocks(scenario: Scenario) -> FimBlocks:
    """Assemble the joint Fisher information blocks at the scenario truth."""
    M = scenario.n_agents
    Hx = np.zeros((M, 6))
    Hb = np.zeros((M, 3 * M))
    for m, agent in enumerate(scenario.agents):
        gx, gb = toa_gradients(scenario.target, agent)
        Hx[m] = gx
        Hb[m, 3 * m : 3 * m + 3] = gb

    ct_diag = np.diag(scenario.noise.C_tau)
    if np.any(ct_diag <= 0):
        raise ConditioningError("C_tau must be strictly positive for the information matrix")
    ct_inv = 1.0 / ct_diag

    try:
        np.linalg.cholesky(scenario.noise.C_beta)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("C_beta must be positive definite for the information matrix") from None
    C_beta_inv = np.linalg.inv(scenario.noise.C_beta)

    R1 = Hx.T @ (ct_inv[:, None] * Hx)
    R2 = Hx.T @ (ct_inv[:, None] * Hb)
    R3 = Hb.T @ (ct_inv[:, None] * Hb) + C_beta_inv
    return FimBlocks(R1=R1, R2=R2, R3=0.5 * (R3 + R3.T))


def crlb_target(scenario: Scenario) -> CrlbResult:
    """Cramer-Rao lower bound of the 6-dimensional target state.

    The agent block is marginalized out by Schur complement; the full joint
    FIM is returned alongside for diagnostics and cross-checks.

    Raises
    ------
    DegenerateGeometryError
        If the Schur complement is singular (unobservable geometry, e.g.
        collinear agents).
    """
    blocks = fim_blocks(scenario)
    S = blocks.R1 - blocks.R2 @ np.linalg.solve(blocks.R3, blocks.R2.T)
    S = 0.5 * (S + S.T)
    eigs = np.linalg.eigvalsh(S)
    if eigs[0] <= 1e-12 * max(eigs[-1], 1.0):
        raise DegenerateGeometryError(
            f"target information is singular (min eig {eigs[0]:.3e}); geometry unobservable"
        )
    crlb_x = np.linalg.inv(S)
    crlb_x = 0.5 * (crlb_x + crlb_x.T)
    full = np.block([[blocks.R1, blocks.R2], [blocks.R2.T, blocks.R3]])
    return CrlbResult(crlb_x=crlb_x, full_fim=full)


def analytic_cov(
    scenario: Scenario,
    frame: ObservedFrame | None = None,
    form: str = "direct",
) -> np.ndarray:
    """First-order covariance prediction for the two-step estimator.

    With ``frame=None`` every matrix is evaluated at the scenario truth on a
    noise-free frame; this is the variant compared against the CRLB.  With a
    frame supplied, the design matrix is taken from the observed (noisy)
    frame while the error statistics and retraction Jacobian stay at truth.

    ``form="direct"`` computes ``((A J)^T C_e^-1 (A J))^-1``.
    ``form="factored"`` computes the algebraically equivalent
    matrix-inversion-lemma expansion through ``G1 = D^-1 B`` and
    ``G2 = D^-1 A J``, kept as an independent cross-check of the direct form.

    Raises
    ------
    ConditioningError
        If some ``d_m = 0`` (the factored form divides by it) or the
        information matrix is singular.
    """
    if form not in ("direct", "factored"):
        raise ValueError(f"unknown form {form!r}")
    if frame is None:
        frame = exact_frame(scenario)

    A, _, _ = _design_arrays(frame)
    em = build_error_model(frame, scenario.target)
    J = theta_jacobian(scenario.target)
    AJ = A @ J

    d = np.diag(em.D)
    zero = np.flatnonzero(d == 0.0)
    if zero.size:
        raise ConditioningError(f"d_m is zero for agent index {int(zero[0])}")

    if form == "direct":
        info = AJ.T @ np.linalg.solve(em.C_e, AJ)
    else:
        G1 = em.B / d[:, None]
        G2 = AJ / d[:, None]
        ct_inv = np.linalg.inv(frame.noise.C_tau)
        C_beta_inv = np.linalg.inv(frame.noise.C_beta)
        cross = G2.T @ ct_inv @ G1
        inner = G1.T @ ct_inv @ G1 + C_beta_inv
        info = G2.T @ ct_inv @ G2 - cross @ np.linalg.solve(inner, cross.T)

    info = 0.5 * (info + info.T)
    eigs = np.linalg.eigvalsh(info)
    if eigs[0] <= 1e-14 * max(eigs[-1], 1.0):
        raise ConditioningError(f"predicted information matrix is singular (min eig {eigs[0]:.3e})")
    cov = np.linalg.inv(info)
    return 0.5 * (cov + cov.T)
