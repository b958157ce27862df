"""
Monte-Carlo harness for sparse system identification.

Trials are simulated in batches: all trials in a batch advance one iteration
at a time through the shared update kernel, each row of the weight matrix
being one trial. Every algorithm sees exactly the same input, noise and
true-system sequences. Per-trial squared-deviation traces are kept and
folded into the mean in ascending trial order, so the resulting curves do
not depend on batch size or on how many worker processes were used.
"""
import dataclasses
import math
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import eigvalsh, toeplitz

from .exceptions import DimensionError, ParameterError
from .filters import UPDATE_RULES, FilterParams, LeakSign, adapt, kernel_arguments, predict
from .signals import (
    DEFAULT_PHASES,
    Ar1Config,
    NoiseConfig,
    PhaseSchedule,
    PhaseSpec,
    RngStream,
    draw_schedule,
    gen_ar1_input,
    gen_noise,
    regressors,
)

__all__ = [
    "AlgorithmSpec",
    "ExperimentConfig",
    "TrialOutcome",
    "MsdCurve",
    "SteadyStateEntry",
    "SteadyStateReport",
    "ExperimentResult",
    "StabilityDiagnostic",
    "default_algorithms",
    "msd",
    "run_trial",
    "run_experiment",
    "steady_state",
    "estimate_lambda_max",
]

PENALIZED_KINDS = frozenset({"lp_lms", "lp_llms"})


@dataclasses.dataclass(frozen=True)
class AlgorithmSpec:
    """A named filter: an update rule (``kind``) plus its hyperparameters."""

    name: str
    kind: str
    params: FilterParams

    def __post_init__(self):
        if self.kind not in UPDATE_RULES:
            raise ParameterError(
                f"unknown update rule {self.kind!r}; expected one of {sorted(UPDATE_RULES)}"
            )
        if self.kind == "llms" and self.params.gamma >= 1:
            raise ParameterError(f"leaky LMS needs gamma < 1, got {self.params.gamma!r}")

    @property
    def penalized(self):
        return self.kind in PENALIZED_KINDS


def default_algorithms(mu=0.015, gamma=0.005, rho_p=0.0005, epsilon_p=10.0, p=0.5):
    """The four filters with the parameters of the default three-phase experiment."""
    return (
        AlgorithmSpec("lms", "lms", FilterParams(mu=mu)),
        AlgorithmSpec("llms", "llms", FilterParams(mu=mu, gamma=gamma, leak_sign=LeakSign.MINUS)),
        AlgorithmSpec("lp_lms", "lp_lms", FilterParams(mu=mu, rho_p=rho_p, epsilon_p=epsilon_p, p=p)),
        AlgorithmSpec(
            "lp_llms",
            "lp_llms",
            FilterParams(mu=mu, gamma=gamma, rho_p=rho_p, epsilon_p=epsilon_p, p=p),
        ),
    )


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of a Monte-Carlo run.

    ``phases`` is a template from which a fresh random system is drawn for
    every trial and phase. Passing an explicit ``schedule`` instead fixes
    the true systems for all trials (the phase ``rho_p`` overrides then come
    from the schedule).
    """

    ar1: Ar1Config = Ar1Config()
    noise: NoiseConfig = NoiseConfig()
    n_taps: int = 16
    phases: Tuple[PhaseSpec, ...] = DEFAULT_PHASES
    algorithms: Tuple[AlgorithmSpec, ...] = default_algorithms()
    n_trials: int = 200
    seed: int = 0
    steady_state_window: int = 1000
    schedule: Optional[PhaseSchedule] = None

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.n_trials < 1:
            raise ParameterError(f"n_trials must be >= 1, got {self.n_trials!r}")
        if self.n_taps < 1:
            raise ParameterError(f"n_taps must be >= 1, got {self.n_taps!r}")
        if not self.algorithms:
            raise ParameterError("at least one algorithm is required")
        names = [alg.name for alg in self.algorithms]
        if len(set(names)) != len(names):
            raise ParameterError(f"algorithm names must be unique, got {names}")
        if self.schedule is not None:
            if self.schedule.n_taps != self.n_taps:
                raise DimensionError("schedule systems do not match n_taps")
        else:
            if not self.phases:
                raise ParameterError("at least one phase is required")
            for spec in self.phases:
                if spec.n_nonzero < 1 or spec.n_nonzero > self.n_taps:
                    raise ParameterError(
                        f"phase sparsity {spec.n_nonzero} outside [1, {self.n_taps}]"
                    )
        if self.steady_state_window < 1 or self.steady_state_window > min(self.spans):
            raise ParameterError(
                f"steady_state_window must lie in [1, {min(self.spans)}], "
                f"got {self.steady_state_window!r}"
            )

    @property
    def spans(self):
        if self.schedule is not None:
            return self.schedule.spans
        return tuple(spec.span for spec in self.phases)

    @property
    def total_length(self):
        return sum(self.spans)

    def schedule_for(self, trial):
        if self.schedule is not None:
            return self.schedule
        return draw_schedule(self.phases, self.n_taps, RngStream(self.seed, trial))


class TrialOutcome(NamedTuple):
    """Squared-deviation traces of one trial.

    ``diverged_at`` maps each algorithm to the first iteration with
    non-finite weights, or ``None``. Trace entries from that iteration on
    are NaN.
    """

    traces: Dict[str, np.ndarray]
    diverged_at: Dict[str, Optional[int]]


@dataclasses.dataclass(frozen=True)
class MsdCurve:
    """Trial-averaged MSD per iteration for each algorithm.

    Attributes
    ----------
    values : dict of str to ndarray
        Mean squared deviation per iteration; all-NaN when every trial of
        that algorithm diverged.
    n_trials : dict of str to int
        Number of trials contributing to each mean.
    diverged : dict of str to tuple of (int, int)
        ``(trial, iteration)`` pairs of the excluded trials.
    """

    values: Dict[str, np.ndarray]
    n_trials: Dict[str, int]
    diverged: Dict[str, Tuple[Tuple[int, int], ...]]

    @property
    def names(self):
        return tuple(self.values)

    def is_valid(self, name):
        return self.n_trials[name] > 0

    def __len__(self):
        return len(next(iter(self.values.values())))


class SteadyStateEntry(NamedTuple):
    phase: int
    algorithm: str
    linear: float
    db: float


@dataclasses.dataclass(frozen=True)
class SteadyStateReport:
    entries: Tuple[SteadyStateEntry, ...]
    window: int

    @property
    def n_phases(self):
        return 1 + max(e.phase for e in self.entries)

    def value(self, phase, algorithm):
        for e in self.entries:
            if e.phase == phase and e.algorithm == algorithm:
                return e.linear
        raise KeyError((phase, algorithm))

    def ranking(self, phase):
        """Algorithms of a phase sorted from lowest to highest steady-state MSD."""
        rows = [e for e in self.entries if e.phase == phase and not math.isnan(e.linear)]
        return [e.algorithm for e in sorted(rows, key=lambda e: e.linear)]

    def format_table(self):
        width = max([9] + [len(e.algorithm) for e in self.entries])
        lines = [f"{'phase':>5}  {'algorithm':<{width}}  {'msd_db':>10}  {'msd_linear':>14}"]
        for e in self.entries:
            lines.append(
                f"{e.phase + 1:>5}  {e.algorithm:<{width}}  {e.db:>10.4f}  {e.linear:>14.8e}"
            )
        return "\n".join(lines) + "\n"


class ExperimentResult(NamedTuple):
    curve: MsdCurve
    report: SteadyStateReport


class StabilityDiagnostic(NamedTuple):
    """Largest input-covariance eigenvalue and the step-size bound it implies."""

    lambda_max: float
    mu_bound: float

    def admits(self, mu):
        return 0 < mu < self.mu_bound


def msd(true_w, est_w):
    """Squared deviation ``||true_w - est_w||^2``."""
    true_w = np.asarray(true_w, dtype=float)
    est_w = np.asarray(est_w, dtype=float)
    if true_w.shape[-1] != est_w.shape[-1]:
        raise DimensionError(
            f"length mismatch: {true_w.shape[-1]} vs {est_w.shape[-1]} taps"
        )
    dev = true_w - est_w
    return np.sum(dev * dev, axis=-1)


def _simulate(cfg, trials):
    """Run a batch of trials; returns ``{name: (len(trials), K) traces}``."""
    n, K, B = cfg.n_taps, cfg.total_length, len(trials)
    inputs = np.zeros((B, K + n - 1))
    desired = np.empty((B, K))
    truth = []
    schedules = [cfg.schedule_for(t) for t in trials]
    for row, (trial, schedule) in enumerate(zip(trials, schedules)):
        base = RngStream(cfg.seed, trial)
        x = gen_ar1_input(cfg.ar1, K, base.for_purpose("input"))
        noise = gen_noise(cfg.noise, K, base.for_purpose("noise"))
        inputs[row, n - 1:] = x
        # same arithmetic as synthesize_desired, one row per iteration
        desired[row] = predict(schedule.system_matrix(), regressors(x, n)) + noise
        truth.append(schedule)

    traces = {alg.name: np.empty((B, K)) for alg in cfg.algorithms}
    weights = {alg.name: np.zeros((B, n)) for alg in cfg.algorithms}
    with np.errstate(over="ignore", invalid="ignore"):
        start = 0
        for j, span in enumerate(cfg.spans):
            true_w = np.stack([s.phases[j].system for s in truth])
            kernels = []
            for alg in cfg.algorithms:
                params = alg.params
                override = truth[0].phases[j].rho_p_override
                if alg.penalized and override is not None:
                    params = params.with_rho(override)
                kernels.append((alg.name, kernel_arguments(alg.kind, params)))
            for k in range(start, start + span):
                x_k = inputs[:, k:k + n][:, ::-1]
                d_k = desired[:, k]
                for name, kwargs in kernels:
                    w, _, _ = adapt(weights[name], x_k, d_k, **kwargs)
                    weights[name] = w
                    dev = true_w - w
                    traces[name][:, k] = np.sum(dev * dev, axis=-1)
            start += span

    diverged = {}
    for name, tr in traces.items():
        bad = ~np.isfinite(tr)
        first = np.where(bad.any(axis=1), bad.argmax(axis=1), -1)
        for row in np.flatnonzero(first >= 0):
            tr[row, first[row]:] = np.nan
        diverged[name] = first
    return traces, diverged


def run_trial(cfg, trial_index):
    """Simulate one trial of ``cfg``; all filters start from zero weights."""
    traces, diverged = _simulate(cfg, [trial_index])
    return TrialOutcome(
        {name: tr[0] for name, tr in traces.items()},
        {name: (int(d[0]) if d[0] >= 0 else None) for name, d in diverged.items()},
    )


def _chunks(n_trials, size):
    return [list(range(i, min(i + size, n_trials))) for i in range(0, n_trials, size)]


def run_experiment(cfg, n_jobs=1, batch_size=50):
    """Average squared-deviation traces over ``cfg.n_trials`` trials.

    Parameters
    ----------
    cfg : ExperimentConfig
    n_jobs : int
        Worker processes for trial batches (joblib semantics). The result is
        bit-identical for any value.
    batch_size : int
        Trials simulated together in one vectorised batch.

    Returns
    -------
    ExperimentResult
        The MSD curves and their steady-state summary. Trials that diverged
        are left out of the mean of the affected algorithm and listed in
        ``curve.diverged``.
    """
    if batch_size < 1:
        raise ParameterError(f"batch_size must be >= 1, got {batch_size!r}")
    K = cfg.total_length
    names = [alg.name for alg in cfg.algorithms]
    totals = {name: np.zeros(K) for name in names}
    counts = dict.fromkeys(names, 0)
    diverged = {name: [] for name in names}

    chunks = _chunks(cfg.n_trials, batch_size)
    if n_jobs == 1:
        results = (_simulate(cfg, chunk) for chunk in chunks)
    else:
        results = Parallel(n_jobs=n_jobs, return_as="generator")(
            delayed(_simulate)(cfg, chunk) for chunk in chunks
        )
    # generator output is ordered, so the fold below is in trial order
    for chunk, (traces, first_bad) in zip(chunks, results):
        for name in names:
            for row, trial in enumerate(chunk):
                if first_bad[name][row] >= 0:
                    diverged[name].append((trial, int(first_bad[name][row])))
                    continue
                totals[name] += traces[name][row]
                counts[name] += 1

    values = {}
    for name in names:
        if counts[name]:
            values[name] = totals[name] / counts[name]
        else:
            values[name] = np.full(K, np.nan)
    curve = MsdCurve(values, counts, {k: tuple(v) for k, v in diverged.items()})
    return ExperimentResult(curve, steady_state(curve, cfg.spans, cfg.steady_state_window))


def steady_state(curve, schedule, window):
    """Mean of each curve over the last ``window`` iterations of every phase.

    ``schedule`` is a :class:`PhaseSchedule` or a sequence of phase spans.
    A plain mapping of name to array is accepted in place of an
    :class:`MsdCurve`.
    """
    spans = schedule.spans if isinstance(schedule, PhaseSchedule) else tuple(schedule)
    values = curve.values if isinstance(curve, MsdCurve) else dict(curve)
    if window < 1:
        raise ParameterError(f"window must be >= 1, got {window!r}")
    if any(window > span for span in spans):
        raise ParameterError(f"window {window} exceeds the shortest phase ({min(spans)})")
    entries = []
    end = 0
    for j, span in enumerate(spans):
        end += span
        for name, series in values.items():
            series = np.asarray(series, dtype=float)
            if len(series) != sum(spans):
                raise DimensionError(
                    f"curve {name!r} has {len(series)} points, schedule has {sum(spans)}"
                )
            linear = float(np.mean(series[end - window:end]))
            db = 10.0 * math.log10(linear) if linear > 0 else math.nan
            entries.append(SteadyStateEntry(j, name, linear, db))
    return SteadyStateReport(tuple(entries), window)


def estimate_lambda_max(ar1, n_taps):
    """Largest eigenvalue of the unit-variance AR(1) input covariance.

    The ``n_taps x n_taps`` covariance is Toeplitz with entries
    ``a**|i-j|``; plain LMS needs ``0 < mu < 1/lambda_max``.
    """
    a = ar1.a if isinstance(ar1, Ar1Config) else float(ar1)
    if not abs(a) < 1:
        raise ParameterError(f"AR(1) coefficient must satisfy |a| < 1, got {a!r}")
    if n_taps < 1:
        raise ParameterError(f"n_taps must be >= 1, got {n_taps!r}")
    cov = toeplitz(a ** np.arange(n_taps))
    lam = float(eigvalsh(cov)[-1])
    return StabilityDiagnostic(lam, 1.0 / lam)
