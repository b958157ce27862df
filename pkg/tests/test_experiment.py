import dataclasses

import numpy as np
import pytest

from sparselms.exceptions import DimensionError, ParameterError
from sparselms.experiment import (
    AlgorithmSpec,
    ExperimentConfig,
    MsdCurve,
    estimate_lambda_max,
    msd,
    default_algorithms,
    run_experiment,
    run_trial,
    steady_state,
)
from sparselms.filters import FilterParams, lms_update, lp_llms_update
from sparselms.signals import (
    Ar1Config,
    NoiseConfig,
    Phase,
    PhaseSchedule,
    PhaseSpec,
    RngStream,
    gen_ar1_input,
    gen_noise,
    regressors,
    synthesize_desired,
)


def small_config(**overrides):
    base = dict(
        phases=(PhaseSpec(120, 1, 0.0005), PhaseSpec(120, 4, 0.0002), PhaseSpec(120, 8, 0.0001)),
        n_trials=7,
        seed=11,
        steady_state_window=50,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestMsd:
    def test_identical(self):
        assert msd([0.3, -2.0], [0.3, -2.0]) == 0.0

    def test_unit_deviation(self):
        assert msd([1.0, 0.0], [0.0, 0.0]) == 1.0

    def test_hand_evaluated(self):
        assert msd([1.0, -1.0], [0.5, -0.5]) == 0.5

    def test_mismatch(self):
        with pytest.raises(DimensionError):
            msd([1.0], [1.0, 2.0])


class TestRunTrial:
    def test_zero_system_zero_noise_is_fixed_point(self):
        schedule = PhaseSchedule((Phase(np.zeros(16), 200, 0.0005),))
        cfg = ExperimentConfig(noise=NoiseConfig(0.0), schedule=schedule, n_trials=1,
                               steady_state_window=10)
        outcome = run_trial(cfg, 0)
        for name, trace in outcome.traces.items():
            np.testing.assert_array_equal(trace, np.zeros(200))
            assert outcome.diverged_at[name] is None

    def test_deterministic(self):
        cfg = small_config()
        a, b = run_trial(cfg, 3), run_trial(cfg, 3)
        for name in a.traces:
            assert a.traces[name].tobytes() == b.traces[name].tobytes()

    def test_lms_converges(self):
        cfg = ExperimentConfig(
            phases=(PhaseSpec(8000, 1),),
            algorithms=(AlgorithmSpec("lms", "lms", FilterParams(mu=0.015)),),
            n_trials=1,
            seed=5,
        )
        trace = run_trial(cfg, 0).traces["lms"]
        assert trace[-1] < 1.0
        blocks = trace.reshape(-1, 100).mean(axis=1)
        # decreasing trend over the transient, then flat at the noise floor
        assert blocks[0] > blocks[5] > blocks[20]
        assert blocks[-10:].mean() < 0.01

    def test_matches_scalar_updates(self):
        """Replays one trial with the public single-vector update functions."""
        cfg = small_config(n_trials=1)
        outcome = run_trial(cfg, 2)
        base = RngStream(cfg.seed, 2)
        K = cfg.total_length
        x = gen_ar1_input(cfg.ar1, K, base.for_purpose("input"))
        noise = gen_noise(cfg.noise, K, base.for_purpose("noise"))
        schedule = cfg.schedule_for(2)
        systems = schedule.system_matrix()
        rows = regressors(x, cfg.n_taps)
        overrides = np.repeat([ph.rho_p_override for ph in schedule.phases], schedule.spans)
        algs = {alg.name: alg for alg in cfg.algorithms}
        for name, update in (("lms", lms_update), ("lp_llms", lp_llms_update)):
            w = np.zeros(cfg.n_taps)
            expected = np.empty(K)
            for k in range(K):
                params = algs[name].params
                if algs[name].penalized:
                    params = params.with_rho(overrides[k])
                d = synthesize_desired(systems[k], rows[k], noise[k])
                w = update(w, rows[k], d, params).new_weights
                expected[k] = msd(systems[k], w)
            assert outcome.traces[name].tobytes() == expected.tobytes()

    def test_paired_streams(self):
        twin = AlgorithmSpec("lms_twin", "lms", FilterParams(mu=0.015))
        algs = default_algorithms()
        solo = run_trial(small_config(algorithms=algs[:1]), 1)
        full = run_trial(small_config(algorithms=algs + (twin,)), 1)
        assert full.traces["lms"].tobytes() == full.traces["lms_twin"].tobytes()
        assert full.traces["lms"].tobytes() == solo.traces["lms"].tobytes()

    def test_phase_rho_override_applied(self):
        with_override = run_trial(small_config(), 0).traces["lp_lms"]
        plain = dataclasses.replace(
            small_config(),
            phases=tuple(PhaseSpec(p.span, p.n_nonzero, None) for p in small_config().phases),
        )
        without = run_trial(plain, 0).traces["lp_lms"]
        # phase 1 override equals the default rho, later phases differ
        assert with_override[:120].tobytes() == without[:120].tobytes()
        assert not np.array_equal(with_override[120:], without[120:])

    def test_weights_persist_across_phases(self):
        schedule = PhaseSchedule((Phase(np.eye(4)[0], 300), Phase(np.eye(4)[0], 300)))
        cfg = ExperimentConfig(n_taps=4, schedule=schedule, n_trials=1, steady_state_window=10,
                               algorithms=default_algorithms()[:1])
        trace = run_trial(cfg, 0).traces["lms"]
        # no reset: the second phase starts where the first ended
        assert trace[300] < 0.1 * trace[0]


class TestRunExperiment:
    def test_single_trial_equals_trace(self):
        cfg = small_config(n_trials=1)
        curve = run_experiment(cfg).curve
        outcome = run_trial(cfg, 0)
        for name in curve.names:
            assert curve.values[name].tobytes() == outcome.traces[name].tobytes()

    @pytest.mark.parametrize("batch_size", [1, 3, 7])
    def test_batch_size_invariance(self, batch_size):
        cfg = small_config()
        ref = run_experiment(cfg, batch_size=2).curve
        got = run_experiment(cfg, batch_size=batch_size).curve
        for name in ref.names:
            assert got.values[name].tobytes() == ref.values[name].tobytes()

    def test_parallel_matches_serial(self):
        cfg = small_config()
        serial = run_experiment(cfg, batch_size=2).curve
        parallel = run_experiment(cfg, n_jobs=2, batch_size=2).curve
        for name in serial.names:
            assert parallel.values[name].tobytes() == serial.values[name].tobytes()

    def test_nonnegative(self):
        curve = run_experiment(small_config()).curve
        for values in curve.values.values():
            assert np.all(values >= 0)

    def test_trailing_trial_removal(self):
        cfg = small_config()
        full = run_experiment(cfg).curve
        fewer = run_experiment(dataclasses.replace(cfg, n_trials=cfg.n_trials - 1)).curve
        last = run_trial(cfg, cfg.n_trials - 1)
        for name in full.names:
            rebuilt = ((cfg.n_trials - 1) * fewer.values[name] + last.traces[name]) / cfg.n_trials
            np.testing.assert_allclose(full.values[name], rebuilt, rtol=1e-12)

    def test_partial_divergence_excluded(self):
        cfg = ExperimentConfig(
            phases=(PhaseSpec(2000, 1),),
            algorithms=(
                AlgorithmSpec("fast", "lms", FilterParams(mu=0.12)),
                AlgorithmSpec("lms", "lms", FilterParams(mu=0.015)),
            ),
            n_trials=10,
            steady_state_window=100,
        )
        curve = run_experiment(cfg).curve
        dead = {trial for trial, _ in curve.diverged["fast"]}
        assert 0 < len(dead) < 10
        assert curve.n_trials["fast"] == 10 - len(dead)
        assert curve.n_trials["lms"] == 10 and curve.diverged["lms"] == ()
        assert np.all(np.isfinite(curve.values["fast"]))
        survivors = [t for t in range(10) if t not in dead]
        expected = np.zeros(2000)
        for t in survivors:
            expected += run_trial(cfg, t).traces["fast"]
        assert curve.values["fast"].tobytes() == (expected / len(survivors)).tobytes()
        trial, at = curve.diverged["fast"][0]
        trace = run_trial(cfg, trial).traces["fast"]
        assert np.all(np.isnan(trace[at:])) and np.all(np.isfinite(trace[:at]))

    def test_total_divergence_marks_curve_invalid(self):
        cfg = ExperimentConfig(
            phases=(PhaseSpec(1500, 1),),
            algorithms=(
                AlgorithmSpec("boom", "lms", FilterParams(mu=0.5)),
                AlgorithmSpec("lms", "lms", FilterParams(mu=0.015)),
            ),
            n_trials=3,
            steady_state_window=100,
        )
        result = run_experiment(cfg)
        assert not result.curve.is_valid("boom")
        assert np.all(np.isnan(result.curve.values["boom"]))
        assert result.curve.is_valid("lms")
        assert result.report.ranking(0) == ["lms"]


class TestConfigValidation:
    def test_duplicate_names(self):
        alg = default_algorithms()[0]
        with pytest.raises(ParameterError):
            ExperimentConfig(algorithms=(alg, alg))

    def test_window_too_large(self):
        with pytest.raises(ParameterError):
            ExperimentConfig(phases=(PhaseSpec(100, 1),), steady_state_window=101)

    def test_zero_trials(self):
        with pytest.raises(ParameterError):
            ExperimentConfig(n_trials=0)

    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            AlgorithmSpec("x", "nlms", FilterParams(mu=0.1))

    def test_defaults_match_reference_setup(self):
        cfg = ExperimentConfig()
        assert cfg.n_taps == 16 and cfg.n_trials == 200
        assert cfg.spans == (8000, 8000, 8000)
        assert [p.n_nonzero for p in cfg.phases] == [1, 4, 8]
        assert [p.rho_p for p in cfg.phases] == [0.0005, 0.0002, 0.0001]
        assert cfg.ar1 == Ar1Config(0.8, 1e-3) and cfg.noise == NoiseConfig(1e-2)
        params = {alg.name: alg.params for alg in cfg.algorithms}
        assert all(p.mu == 0.015 for p in params.values())
        assert params["llms"].gamma == params["lp_llms"].gamma == 0.005
        for name in ("lp_lms", "lp_llms"):
            assert (params[name].epsilon_p, params[name].p) == (10.0, 0.5)


class TestSteadyState:
    def test_constant_curve(self):
        report = steady_state({"a": np.full(30, 0.25)}, [10, 10, 10], 4)
        assert [e.linear for e in report.entries] == [0.25] * 3
        assert report.entries[0].db == pytest.approx(10 * np.log10(0.25))

    def test_window_equals_span(self):
        values = np.arange(20.0)
        report = steady_state({"a": values}, [10, 10], 10)
        assert report.value(0, "a") == pytest.approx(4.5)
        assert report.value(1, "a") == pytest.approx(14.5)

    def test_hand_evaluated(self):
        report = steady_state({"a": np.arange(10.0)}, [10], 2)
        assert report.value(0, "a") == 8.5

    def test_window_too_large(self):
        with pytest.raises(ParameterError):
            steady_state({"a": np.zeros(10)}, [5, 5], 6)

    def test_accepts_curve_and_schedule(self):
        curve = MsdCurve({"a": np.ones(4)}, {"a": 1}, {"a": ()})
        schedule = PhaseSchedule((Phase(np.zeros(2), 4),))
        assert steady_state(curve, schedule, 2).value(0, "a") == 1.0

    def test_zero_linear_has_nan_db(self):
        report = steady_state({"a": np.zeros(4)}, [4], 2)
        assert report.entries[0].linear == 0.0 and np.isnan(report.entries[0].db)


class TestLambdaMax:
    def test_white_input(self):
        assert estimate_lambda_max(Ar1Config(0.0, 1.0), 16).lambda_max == pytest.approx(1.0)

    def test_reference_setup(self):
        diag = estimate_lambda_max(Ar1Config(0.8, 1e-3), 16)
        assert 5 < diag.lambda_max < 9
        assert diag.mu_bound > 0.015 and diag.admits(0.015)

    def test_against_dense_eigensolver(self):
        a = 0.8
        cov = a ** np.abs(np.subtract.outer(np.arange(16), np.arange(16)))
        expected = np.linalg.eigvals(cov).real.max()
        assert estimate_lambda_max(Ar1Config(a, 1e-3), 16).lambda_max == pytest.approx(expected, rel=1e-12)

    def test_monotone_and_bounded(self):
        values = [estimate_lambda_max(Ar1Config(0.8, 1e-3), n).lambda_max for n in range(1, 200, 7)]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))
        sup = (1 - 0.8**2) / (1 - 0.8) ** 2
        assert values[-1] < sup and sup - values[-1] < 0.05

    def test_rejects_nonstationary(self):
        with pytest.raises(ParameterError):
            estimate_lambda_max(1.0, 4)
