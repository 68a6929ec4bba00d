import numpy as np
import pytest

from seqtoa import (
    AgentTruth,
    MleConfig,
    NoiseSpec,
    Scenario,
    TargetState,
    UnderdeterminedError,
    crlb_target,
    estimate,
    exact_frame,
    mle_estimate,
    simulate_frame,
    tswls_static_estimate,
)
from seqtoa.model import C_LIGHT

from conftest import random_scenario


def static_scenario(rng, M=10, sigma_tau_sq=1e-3, sigma_s_sq_db=-30.0):
    """Target at rest with zero skew, all broadcasts in one slot."""
    base = random_scenario(rng, M=M, sigma_tau_sq=sigma_tau_sq, sigma_s_sq_db=sigma_s_sq_db, moving=False)
    agents = tuple(AgentTruth(p_m=a.p_m, T_m=a.T_m, t_m=0.0) for a in base.agents)
    return Scenario(agents=agents, target=base.target, noise=base.noise)


class TestMleEstimate:
    def test_zero_noise_truth_init(self, fixed_scenario):
        frame = exact_frame(fixed_scenario)
        report = mle_estimate(frame, MleConfig(init=fixed_scenario.target))
        assert report.iterations == 1
        assert report.converged and not report.diverged
        assert np.allclose(report.x_hat.as_vector(), fixed_scenario.target.as_vector(), atol=1e-9)

    def test_needs_six_rows(self):
        scenario = random_scenario(np.random.default_rng(0), M=5)
        frame = exact_frame(scenario)
        with pytest.raises(UnderdeterminedError):
            mle_estimate(frame, MleConfig(init=scenario.target))

    def test_efficient_when_agents_exact(self, fixed_scenario):
        # C_beta -> 0 makes the agent-trusting MLE the efficient estimator:
        # its error covariance must track the bound within Monte-Carlo error,
        # and its position error must stay comparable (2x) to the pipeline's
        M = fixed_scenario.n_agents
        eps = 1e-12
        scenario = Scenario(
            agents=fixed_scenario.agents,
            target=fixed_scenario.target,
            noise=NoiseSpec.isotropic(1e-3, eps, n_agents=M),
        )
        n = 1000
        rng = np.random.default_rng(1)
        mle_err = np.empty((n, 6))
        prop_err = np.empty((n, 6))
        truth = scenario.target.as_vector()
        for seed in range(n):
            frame = simulate_frame(scenario, seed)
            init = TargetState.from_vector(truth + rng.normal(0.0, 1.0, 6))
            rep = mle_estimate(frame, MleConfig(init=init))
            assert rep.converged and not rep.diverged
            mle_err[seed] = rep.x_hat.as_vector() - truth
            prop_err[seed] = estimate(frame).x_hat.as_vector() - truth

        crlb_diag = np.diag(crlb_target(scenario).crlb_x)
        emp_var = mle_err.var(axis=0)
        # 3 standard errors of a variance estimate: 3*sqrt(2/n)*var
        slack = 3.0 * np.sqrt(2.0 / n)
        assert np.all(np.abs(emp_var / crlb_diag - 1.0) <= slack)

        mse_mle = (mle_err[:, :2] ** 2).sum(axis=1).mean()
        mse_prop = (prop_err[:, :2] ** 2).sum(axis=1).mean()
        assert mse_mle <= 2.0 * mse_prop
        assert mse_prop <= 2.0 * mse_mle

    def test_divergence_rate_grows_with_agent_errors(self, fixed_scenario):
        # rate at sigma_s^2 = -10 dB must be >= the rate at -30 dB
        def divergence_rate(sigma_s_sq_db, n=400):
            count = 0
            rng = np.random.default_rng(2)
            for seed in range(n):
                sigma_db = rng.uniform(sigma_s_sq_db - 5, sigma_s_sq_db + 5, fixed_scenario.n_agents)
                scenario = Scenario(
                    agents=fixed_scenario.agents,
                    target=fixed_scenario.target,
                    noise=NoiseSpec.from_db(-30.0, sigma_db),
                )
                frame = simulate_frame(scenario, seed)
                init = TargetState.from_vector(
                    scenario.target.as_vector() + rng.normal(0.0, 1.0, 6)
                )
                if mle_estimate(frame, MleConfig(init=init)).diverged:
                    count += 1
            return count / n

        assert divergence_rate(-10.0) >= divergence_rate(-30.0)

    def test_rough_init_reported_not_thrown(self, fixed_scenario):
        # a badly wrong (but geometry-preserving) init either converges or is
        # flagged as diverged; the best iterate stays finite and no numerical
        # exception escapes
        frame = simulate_frame(fixed_scenario, 5)
        truth = fixed_scenario.target.as_vector()
        init = TargetState.from_vector(truth + np.array([100.0, -100.0, 20.0, 20.0, 500.0, 100.0]))
        report = mle_estimate(frame, MleConfig(init=init, max_iters=30))
        assert isinstance(report.diverged, bool) and isinstance(report.converged, bool)
        assert np.all(np.isfinite(report.x_hat.as_vector()))


class TestTswlsStatic:
    def test_exact_static_recovery(self):
        scenario = static_scenario(np.random.default_rng(3))
        res = tswls_static_estimate(exact_frame(scenario))
        assert res.success
        assert np.allclose(res.position, scenario.target.p, atol=1e-7)
        assert res.offset == pytest.approx(scenario.target.T, abs=1e-7)

    def test_worse_than_pipeline_on_moving_target(self, fixed_scenario):
        n = 300
        mse_static, mse_prop = 0.0, 0.0
        ok = 0
        for seed in range(n):
            frame = simulate_frame(fixed_scenario, seed)
            res = tswls_static_estimate(frame)
            rep = estimate(frame)
            if not res.success:
                continue
            ok += 1
            mse_static += float((res.position - fixed_scenario.target.p) @ (res.position - fixed_scenario.target.p))
            mse_prop += float(np.sum((rep.x_hat.p - fixed_scenario.target.p) ** 2))
        assert ok > 0.9 * n
        assert mse_static / ok > mse_prop / ok

    def test_ltco_failure_mode(self, fixed_scenario):
        target = TargetState(
            p=fixed_scenario.target.p, v=fixed_scenario.target.v,
            T=1e-3 * C_LIGHT, omega=fixed_scenario.target.omega,
        )
        scenario = Scenario(
            agents=fixed_scenario.agents, target=target,
            noise=NoiseSpec.from_db(-30.0, np.full(10, -20.5)),
        )
        outcomes = [tswls_static_estimate(simulate_frame(scenario, s)) for s in range(50)]
        assert sum(not r.success for r in outcomes) >= 45

    def test_failure_record_not_exception(self):
        # rank-deficient static geometry: agents exactly on the x-axis leave
        # the y column of the design identically zero
        M = 6
        agents = tuple(AgentTruth(p_m=[float(m), 0.0], T_m=0.0, t_m=0.0) for m in range(M))
        scenario = Scenario(
            agents=agents,
            target=TargetState(p=[2.0, 5.0], v=[0, 0], T=0.0, omega=0.0),
            noise=NoiseSpec.isotropic(1e-3, 1e-3, n_agents=M),
        )
        res = tswls_static_estimate(exact_frame(scenario))
        assert not res.success
        assert res.message
