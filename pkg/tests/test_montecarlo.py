import numpy as np
import pytest

from seqtoa import (
    ExperimentSpec,
    TopologyBounds,
    fixed_topology,
    run_trials,
    sample_random_topology,
    validate_scenario,
)
from seqtoa.model import C_LIGHT


class TestSampleRandomTopology:
    def test_determinism(self):
        bounds = TopologyBounds()
        s1 = sample_random_topology(bounds, np.random.default_rng(42))
        s2 = sample_random_topology(bounds, np.random.default_rng(42))
        assert np.array_equal(s1.target.as_vector(), s2.target.as_vector())
        for a1, a2 in zip(s1.agents, s2.agents):
            assert np.array_equal(a1.p_m, a2.p_m) and a1.T_m == a2.T_m
        assert np.array_equal(s1.noise.C_beta, s2.noise.C_beta)

    def test_is_valid_scenario(self):
        s = sample_random_topology(TopologyBounds(), np.random.default_rng(0))
        assert validate_scenario(s) == []

    def test_draw_statistics(self):
        # 1e5 draws: uniform order statistics pin the agent-coordinate range,
        # the target-x mean sits at 25 within 3 SE, clock draws stay in range
        n = 100_000
        bounds = TopologyBounds()
        rng = np.random.default_rng(7)
        agent_xy = np.empty((n, bounds.n_agents, 2))
        target_x = np.empty(n)
        offsets = np.empty((n, bounds.n_agents))
        skews = np.empty(n)
        for i in range(n):
            s = sample_random_topology(bounds, rng)
            for m, a in enumerate(s.agents):
                agent_xy[i, m] = a.p_m
                offsets[i, m] = a.T_m
            target_x[i] = s.target.p[0]
            skews[i] = s.target.omega

        assert 0.0 <= agent_xy.min() <= 0.01 * 50.0
        assert 50.0 - 0.01 * 50.0 <= agent_xy.max() <= 50.0

        se = (150.0 / np.sqrt(12.0)) / np.sqrt(n)
        assert abs(target_x.mean() - 25.0) <= 3.0 * se

        assert np.abs(offsets).max() <= 10e-9 * C_LIGHT
        assert np.abs(skews).max() <= 20e-6 * C_LIGHT


def small_spec(**overrides):
    kwargs = dict(
        scheme="noise_sweep",
        n_trials=40,
        base_seed=99,
        sweep_values=(-40.0, -30.0),
        estimators=("proposed", "tswls_static"),
    )
    kwargs.update(overrides)
    return ExperimentSpec(**kwargs)


class TestRunTrials:
    def test_zero_noise_gives_zero_mse(self):
        spec = small_spec(
            n_trials=10,
            sweep_values=(-240.0,),
            estimators=("proposed",),
            sigma_tau_sq_db=-240.0,
        )
        stats = run_trials(spec)[(-240.0, "proposed")]
        assert stats.n_success == 10
        for block in ("position", "velocity", "offset", "skew"):
            assert stats.mse(block) <= 1e-16

    def test_bit_identical_reruns(self):
        spec = small_spec()
        r1 = run_trials(spec)
        r2 = run_trials(spec)
        assert r1.keys() == r2.keys()
        for key in r1:
            s1, s2 = r1[key], r2[key]
            assert s1.mse_position == s2.mse_position
            assert s1.mse_velocity == s2.mse_velocity
            assert s1.mse_offset == s2.mse_offset
            assert s1.mse_skew == s2.mse_skew
            assert np.array_equal(s1.bias, s2.bias)
            assert np.array_equal(s1.cdf_samples, s2.cdf_samples)
            assert s1.divergence_count == s2.divergence_count
            assert s1.crlb_trace_position == s2.crlb_trace_position

    def test_thread_count_does_not_change_results(self):
        spec = small_spec(n_trials=24, sweep_values=(-30.0,))
        r1 = run_trials(spec, threads=1)
        r2 = run_trials(spec, threads=3)
        for key in r1:
            assert r1[key].mse_position == r2[key].mse_position
            assert np.array_equal(r1[key].cdf_samples, r2[key].cdf_samples)

    def test_mse_monotone_in_agent_uncertainty(self):
        sweep = (-50.0, -40.0, -30.0, -20.0)
        spec = small_spec(n_trials=250, sweep_values=sweep, estimators=("proposed",))
        results = run_trials(spec)
        mses = [results[(v, "proposed")].mse_position for v in sweep]
        for lo, hi in zip(mses, mses[1:]):
            assert hi >= 0.95 * lo

    def test_ltco_failures_counted_not_raised(self):
        spec = small_spec(
            scheme="ltco_sweep",
            n_trials=30,
            sweep_values=(1e-3 * C_LIGHT,),
            estimators=("proposed", "tswls_static"),
            sigma_s_sq_db=-20.5,
        )
        results = run_trials(spec)
        key = (1e-3 * C_LIGHT, "tswls_static")
        assert results[key].divergence_count == 30
        assert np.isnan(results[key].mse_position)
        assert results[(1e-3 * C_LIGHT, "proposed")].n_success == 30

    def test_crlb_attached_per_cell(self):
        spec = small_spec(n_trials=8, sweep_values=(-30.0,))
        stats = run_trials(spec)[(-30.0, "proposed")]
        for block in ("position", "velocity", "offset", "skew"):
            assert np.isfinite(stats.crlb_trace(block)) and stats.crlb_trace(block) > 0

    def test_random_topology_scheme(self):
        spec = small_spec(
            scheme="random_topology",
            n_trials=50,
            sweep_values=(-20.5,),
            estimators=("proposed",),
            topology=TopologyBounds(),
        )
        stats = run_trials(spec)[(-20.5, "proposed")]
        assert stats.n_success + stats.divergence_count == 50
        assert stats.cdf_samples.size == stats.n_success
        assert np.isfinite(stats.crlb_trace_position)

    def test_mle_estimator_runs(self):
        spec = small_spec(n_trials=12, sweep_values=(-30.0,), estimators=("mle",))
        stats = run_trials(spec)[(-30.0, "mle")]
        assert stats.n_success >= 10
        assert stats.mse_position < 1.0

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            small_spec(scheme="bogus")
        with pytest.raises(ValueError):
            small_spec(n_trials=0)
        with pytest.raises(ValueError):
            small_spec(sweep_values=())
        with pytest.raises(ValueError):
            small_spec(estimators=("nope",))


class TestFixedTopology:
    def test_loads_and_validates(self):
        s = fixed_topology()
        assert s.n_agents == 10
        assert validate_scenario(s) == []
        assert np.array_equal(s.target.v, [-5.0, 0.0])
        t = s.slot_times()
        assert t[0] == 0.0
        assert np.allclose(np.diff(t), 0.05)
