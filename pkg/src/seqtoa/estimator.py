"""Two-step weighted least-squares estimator for one observed frame.

Step I squares the pseudorange equations into a linear system in the
9-parameter vector ``theta = [p, v, T, omega, theta1, theta2, theta3]`` with

    theta1 = T^2 - ||p||^2,  theta2 = omega^2 - ||v||^2,  theta3 = T*omega - p.v

and solves it by whitened, column-pivoted QR.  The pivoted QR keeps the solve
stable when a large target clock offset makes all pseudoranges nearly equal
and the design matrix ill-conditioned; an explicit normal-equations solve
breaks down there.

Step II retracts the physical 6-state out of ``theta`` by Gauss-Newton on the
nonlinear consistency constraints, weighted by the Step-I covariance.

Because the Step-I error statistics depend on the unknown state, the full
pipeline (:func:`estimate`) runs two passes: identity weights to get a crude
state, then properly weighted using error statistics evaluated at that state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    ConditioningError,
    DegenerateGeometryError,
    RankDeficiencyError,
    UnderdeterminedError,
)
from .model import ObservedFrame, TargetState

N_THETA = 9
MAX_REFINE_ITERATIONS = 5


@dataclass(frozen=True, eq=False)
class DesignSystem:
    """Linearized system ``A @ theta ~ y`` built from one frame.

    Row m of ``A`` is
    ``[2*p_hat, 2*t_m*p_hat, -2*alpha_hat, -2*t_m*alpha_hat, 1, t_m^2, 2*t_m]``
    and ``y_m = ||p_hat||^2 - alpha_hat^2``, with the pseudorange
    ``alpha_hat_m = tau_tilde_m + T_hat_m``.
    """

    A: np.ndarray  # (M, 9)
    y: np.ndarray  # (M,)
    alpha_hat: np.ndarray  # (M,)


@dataclass(frozen=True, eq=False)
class ErrorModel:
    """First-order statistics of the Step-I equation error.

    ``e = B @ dbeta + D @ dtau`` with
    ``b_m = [2*(p + v*t_m - p_hat_m), d_m]`` occupying agent m's block of
    ``B`` and ``d_m = -2*(T + omega*t_m - alpha_hat_m)`` on the diagonal of
    ``D``; both are evaluated at a supplied reference state.  The covariance
    is ``C_e = B C_beta B^T + D C_tau D^T``.
    """

    B: np.ndarray  # (M, 3M)
    D: np.ndarray  # (M, M) diagonal
    C_e: np.ndarray  # (M, M)


@dataclass(frozen=True, eq=False)
class WlsSolution:
    """Step-I output.

    ``sqrt_info`` is the square-root information factor ``R @ P^T`` of the
    whitened design, satisfying ``sqrt_info.T @ sqrt_info = inv(C_wls)``;
    Step II weights with it directly instead of inverting ``C_wls``.
    """

    theta_hat: np.ndarray  # (9,)
    C_wls: np.ndarray  # (9, 9)
    cond_estimate: float = float("nan")
    permutation: np.ndarray | None = None  # (9,) pivot order: column permutation[j] factored j-th
    sqrt_info: np.ndarray | None = None  # (9, 9); derived from C_wls when absent


@dataclass(frozen=True, eq=False)
class EstimateReport:
    """Final estimate with convergence and conditioning diagnostics."""

    x_hat: TargetState
    iterations: int
    converged: bool
    cond_estimate: float
    C_wls: np.ndarray | None = None
    estimator_id: str = "proposed"
    diverged: bool = False


def _design_arrays(frame: ObservedFrame) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    t = frame.slot_times()
    p_hat = frame.broadcast_positions()
    alpha = frame.toas() + frame.broadcast_offsets()
    A = np.column_stack(
        [
            2.0 * p_hat,
            2.0 * t[:, None] * p_hat,
            -2.0 * alpha,
            -2.0 * t * alpha,
            np.ones_like(t),
            t**2,
            2.0 * t,
        ]
    )
    y = np.sum(p_hat**2, axis=1) - alpha**2
    return A, y, alpha


def build_design(frame: ObservedFrame) -> DesignSystem:
    """Assemble the squared-pseudorange linear system from a frame.

    Raises
    ------
    UnderdeterminedError
        If the frame has fewer than 9 records (9 unknowns in ``theta``).
    """
    if frame.n_agents < N_THETA:
        raise UnderdeterminedError(
            f"linear solve needs M >= 9 broadcasts for the 9 unknowns, got M = {frame.n_agents}"
        )
    A, y, alpha = _design_arrays(frame)
    return DesignSystem(A=A, y=y, alpha_hat=alpha)


def build_error_model(frame: ObservedFrame, x_ref: TargetState) -> ErrorModel:
    """Evaluate the equation-error statistics at a reference state.

    Second-order error terms are dropped; ``C_e`` is exact to first order in
    the TOA noise and broadcast errors.

    Raises
    ------
    ConditioningError
        If ``C_e`` is numerically singular (happens when some ``d_m`` and the
        corresponding agent variances are simultaneously ~0).
    """
    t = frame.slot_times()
    p_hat = frame.broadcast_positions()
    alpha = frame.toas() + frame.broadcast_offsets()
    M = frame.n_agents

    d = -2.0 * (x_ref.T + x_ref.omega * t - alpha)
    b_pos = 2.0 * (x_ref.p + t[:, None] * x_ref.v - p_hat)

    B = np.zeros((M, 3 * M))
    rows = np.arange(M)
    B[rows, 3 * rows] = b_pos[:, 0]
    B[rows, 3 * rows + 1] = b_pos[:, 1]
    B[rows, 3 * rows + 2] = d

    D = np.diag(d)
    C_e = B @ frame.noise.C_beta @ B.T + D @ frame.noise.C_tau @ D.T
    C_e = 0.5 * (C_e + C_e.T)

    try:
        np.linalg.cholesky(C_e)
    except np.linalg.LinAlgError:
        raise ConditioningError(
            "equation-error covariance C_e is numerically singular; "
            "check for near-zero d_m together with near-zero agent variances"
        ) from None
    return ErrorModel(B=B, D=D, C_e=C_e)


def whitening_matrix(C_e: np.ndarray) -> np.ndarray:
    """Symmetric inverse square root ``W`` with ``W.T @ W = inv(C_e)``.

    Diagonal input takes the cheap elementwise path; otherwise the symmetric
    eigenfactorization is used.  Any valid square root would give the same
    weighted solution; this choice is fixed for reproducibility.
    """
    C_e = np.asarray(C_e, dtype=float)
    diag = np.diag(C_e)
    if np.count_nonzero(C_e - np.diag(diag)) == 0:
        if np.any(diag <= 0):
            raise ConditioningError("C_e diagonal must be strictly positive for whitening")
        return np.diag(1.0 / np.sqrt(diag))
    w, V = np.linalg.eigh(C_e)
    if w[0] <= 1e-15 * max(w[-1], 0.0) or w[0] <= 0:
        raise ConditioningError(f"C_e is not positive definite (min eig {w[0]:.3e})")
    return (V * (1.0 / np.sqrt(w))) @ V.T


def solve_wls_qr(design: DesignSystem, C_e: np.ndarray) -> WlsSolution:
    """Weighted least-squares solve of the Step-I system by pivoted QR.

    The system is whitened with ``W = C_e^(-1/2)``, then ``W A`` is factored
    as ``Q R P^T`` with column pivoting and ``R P^T theta = Q^T W y`` is
    solved by back substitution.  The solution covariance is
    ``C_wls = (P R^T R P^T)^(-1)``, formed from the triangular factor without
    ever building normal equations, which is what keeps large-clock-offset
    frames solvable.

    Raises
    ------
    RankDeficiencyError
        If the whitened design has numerical rank < 9; the detected rank is
        attached to the exception.
    """
    M, n = design.A.shape
    if M < n:
        raise UnderdeterminedError(f"need at least {n} rows, got {M}")
    W = whitening_matrix(C_e)
    WA = W @ design.A
    Wy = W @ design.y

    Q, R, piv = scipy.linalg.qr(WA, mode="economic", pivoting=True)
    r_diag = np.abs(np.diag(R))
    tol = max(M, n) * np.finfo(float).eps * (r_diag[0] if r_diag[0] > 0 else 1.0)
    rank = int(np.count_nonzero(r_diag > tol))
    if rank < n:
        raise RankDeficiencyError(
            f"whitened design matrix is rank deficient (numerical rank {rank} < {n})",
            numerical_rank=rank,
        )

    z = scipy.linalg.solve_triangular(R, Q.T @ Wy)
    theta = np.empty(n)
    theta[piv] = z

    R_inv = scipy.linalg.solve_triangular(R, np.eye(n))
    C_pivoted = R_inv @ R_inv.T
    C_wls = np.empty((n, n))
    C_wls[np.ix_(piv, piv)] = C_pivoted

    sqrt_info = np.zeros((n, n))
    sqrt_info[:, piv] = R

    return WlsSolution(
        theta_hat=theta,
        C_wls=C_wls,
        cond_estimate=float(abs(R[0, 0] / R[n - 1, n - 1])),
        permutation=piv.copy(),
        sqrt_info=sqrt_info,
    )


def _state_vector(x) -> np.ndarray:
    if isinstance(x, TargetState):
        return x.as_vector()
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.size != 6:
        raise ValueError(f"state must have 6 entries, got {arr.size}")
    return arr


def theta_model(x) -> np.ndarray:
    """Map a 6-state to its consistent 9-vector ``f(x)``.

    Accepts a :class:`TargetState` or a length-6 array.
    """
    s = _state_vector(x)
    p, v, T, omega = s[0:2], s[2:4], s[4], s[5]
    return np.concatenate(
        [s, [T * T - p @ p, omega * omega - v @ v, T * omega - p @ v]]
    )


def theta_jacobian(x) -> np.ndarray:
    """9x6 Jacobian of :func:`theta_model`: identity on top of the
    derivatives of the three quadratic constraints."""
    s = _state_vector(x)
    px, py, vx, vy, T, omega = s
    J1 = np.array(
        [
            [-2 * px, -2 * py, 0.0, 0.0, 2 * T, 0.0],
            [0.0, 0.0, -2 * vx, -2 * vy, 0.0, 2 * omega],
            [-vx, -vy, -px, -py, omega, T],
        ]
    )
    return np.vstack([np.eye(6), J1])


def _sqrt_info_of(wls: WlsSolution) -> np.ndarray:
    if wls.sqrt_info is not None:
        return wls.sqrt_info
    # Fall back to a Cholesky factor of C_wls: inv(C) = L^-T L^-1.
    try:
        L = np.linalg.cholesky(wls.C_wls)
    except np.linalg.LinAlgError:
        raise ConditioningError("C_wls is not positive definite") from None
    return scipy.linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True)


def gauss_newton_refine(
    wls: WlsSolution,
    agent_pos_cov_traces,
    max_iterations: int = MAX_REFINE_ITERATIONS,
) -> EstimateReport:
    """Step II: retract the 6-state from ``theta_hat`` by weighted Gauss-Newton.

    Starts from the truncated ``theta_hat`` (its first six entries) and
    iterates increments that minimize the ``C_wls``-weighted mismatch between
    ``theta_hat`` and ``f(x)``.  Iteration stops when the squared norm of the
    position part of the increment drops below the mean agent position
    covariance trace, or after ``max_iterations`` (default 5); the
    ``converged`` flag records which exit fired.

    Raises
    ------
    DegenerateGeometryError
        If the weighted Jacobian loses column rank.
    """
    traces = np.asarray(agent_pos_cov_traces, dtype=float).reshape(-1)
    if traces.size == 0:
        raise ValueError("agent_pos_cov_traces must be non-empty")
    threshold = float(np.sum(traces) / traces.size)

    K = _sqrt_info_of(wls)
    x = wls.theta_hat[:6].copy()
    converged = False
    iterations = 0
    for _ in range(max_iterations):
        r = wls.theta_hat - theta_model(x)
        J = theta_jacobian(x)
        dx, _, rank, _ = np.linalg.lstsq(K @ J, K @ r, rcond=None)
        if rank < 6:
            raise DegenerateGeometryError(
                f"weighted retraction Jacobian is rank deficient (rank {rank} < 6)"
            )
        x = x + dx
        iterations += 1
        if float(dx[:2] @ dx[:2]) <= threshold:
            converged = True
            break

    return EstimateReport(
        x_hat=TargetState.from_vector(x),
        iterations=iterations,
        converged=converged,
        cond_estimate=wls.cond_estimate,
        C_wls=wls.C_wls,
    )


def estimate(frame: ObservedFrame) -> EstimateReport:
    """Full two-pass pipeline for one frame.

    Pass 1 solves with identity weights to get a crude state; pass 2 evaluates
    the error statistics there, re-solves, and runs the Gauss-Newton
    retraction.  Both passes use the pivoted-QR path, so stability under large
    target clock offsets is unconditional.  The report carries the pass-2
    conditioning diagnostics.
    """
    design = build_design(frame)
    M = frame.n_agents

    pass1 = solve_wls_qr(design, np.eye(M))
    x_ls = TargetState.from_vector(pass1.theta_hat[:6])

    error_model = build_error_model(frame, x_ls)
    wls = solve_wls_qr(design, error_model.C_e)
    return gauss_newton_refine(wls, frame.noise.position_cov_traces())


# --- degraded static mode -------------------------------------------------

_STATIC_COLS = np.array([0, 1, 4, 6])  # [2*p_hat, -2*alpha_hat, 1] columns
_STATIC_THETA_ROWS = np.array([0, 1, 4, 6])  # [p, T, theta1] entries of theta


def _embed_static(q: np.ndarray) -> TargetState:
    return TargetState(p=q[0:2], v=np.zeros(2), T=q[2], omega=0.0)


def estimate_degraded(frame: ObservedFrame) -> tuple[np.ndarray, float, np.ndarray]:
    """Static degradation of the pipeline: position and offset only.

    Velocity and skew are forced to zero, the design matrix collapses to the
    columns ``[2*p_hat, -2*alpha_hat, 1]`` with unknowns ``[p, T, theta1]``,
    both passes solve explicit normal equations (no pivoted QR), and exactly
    one retraction iteration runs.  With all slot times equal this is the
    classic static two-step solver; it is kept as a cross-check against the
    standalone baseline implementation.

    Returns ``(position, offset, covariance_3x3)``.

    Raises
    ------
    ConditioningError
        If a normal matrix is singular or numerically unusable (the expected
        failure mode under large target clock offsets).
    """
    A, y, _ = _design_arrays(frame)
    if frame.n_agents < 4:
        raise UnderdeterminedError(
            f"static solve needs at least 4 broadcasts, got M = {frame.n_agents}"
        )
    G = A[:, _STATIC_COLS]

    def _normal_solve(weight: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        N = G.T @ weight @ G
        if not np.all(np.isfinite(N)) or np.linalg.cond(N) > 1e12:
            raise ConditioningError("static normal matrix is singular or ill-conditioned")
        q = np.linalg.solve(N, G.T @ weight @ y)
        return q, np.linalg.inv(N)

    M = frame.n_agents
    theta_s, _ = _normal_solve(np.eye(M))

    ref = _embed_static(theta_s[:3])
    error_model = build_error_model(frame, ref)
    C_inv = np.linalg.inv(error_model.C_e)
    theta_s, C4 = _normal_solve(C_inv)

    # one retraction iteration on [p, T, theta1]
    q = theta_s[:3].copy()
    state = _embed_static(q)
    f_s = theta_model(state)[_STATIC_THETA_ROWS]
    J_s = theta_jacobian(state)[np.ix_(_STATIC_THETA_ROWS, np.array([0, 1, 4]))]
    C4_inv = np.linalg.inv(C4)
    N_s = J_s.T @ C4_inv @ J_s
    if np.linalg.cond(N_s) > 1e12:
        raise ConditioningError("static retraction normal matrix is ill-conditioned")
    q = q + np.linalg.solve(N_s, J_s.T @ C4_inv @ (theta_s - f_s))
    cov = np.linalg.inv(N_s)
    return q[0:2], float(q[2]), cov
