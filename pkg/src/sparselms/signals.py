"""
Seeded generators for the identification experiment.

Every random quantity is drawn from an :class:`RngStream`, a named stream
derived from ``(seed, trial, purpose)``. Streams never share state, so the
samples a trial sees do not depend on how many algorithms run, how trials
are batched, or the order trials are executed in.
"""
import dataclasses
import enum
import math
import zlib
from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter

from .exceptions import DimensionError, ParameterError
from .filters import predict

__all__ = [
    "NormalizeMode",
    "Ar1Config",
    "NoiseConfig",
    "SparseSystemSpec",
    "PhaseSpec",
    "Phase",
    "PhaseSchedule",
    "RngStream",
    "DEFAULT_PHASES",
    "gen_ar1_input",
    "gen_noise",
    "gen_sparse_system",
    "draw_schedule",
    "build_default_schedule",
    "synthesize_desired",
    "regressors",
]


class NormalizeMode(enum.Enum):
    THEORETICAL = "theoretical"
    EMPIRICAL = "empirical"


@dataclasses.dataclass(frozen=True)
class Ar1Config:
    """``x[k+1] = a*x[k] + u[k]`` with ``u`` white Gaussian, scaled to unit variance."""

    a: float = 0.8
    innovation_variance: float = 1e-3
    normalize_mode: NormalizeMode = NormalizeMode.THEORETICAL

    def __post_init__(self):
        if not abs(self.a) < 1:
            raise ParameterError(f"AR(1) coefficient must satisfy |a| < 1, got {self.a!r}")
        if not (math.isfinite(self.innovation_variance) and self.innovation_variance > 0):
            raise ParameterError(
                f"innovation variance must be positive, got {self.innovation_variance!r}"
            )
        if not isinstance(self.normalize_mode, NormalizeMode):
            object.__setattr__(self, "normalize_mode", NormalizeMode(self.normalize_mode))

    @property
    def stationary_variance(self):
        return self.innovation_variance / (1.0 - self.a**2)


@dataclasses.dataclass(frozen=True)
class NoiseConfig:
    variance: float = 1e-2

    def __post_init__(self):
        if not (math.isfinite(self.variance) and self.variance >= 0):
            raise ParameterError(f"noise variance must be finite and >= 0, got {self.variance!r}")


@dataclasses.dataclass(frozen=True)
class SparseSystemSpec:
    n_taps: int = 16
    n_nonzero: int = 1

    def __post_init__(self):
        if self.n_taps < 1:
            raise ParameterError(f"n_taps must be >= 1, got {self.n_taps!r}")
        if not 1 <= self.n_nonzero <= self.n_taps:
            raise ParameterError(
                f"n_nonzero must lie in [1, {self.n_taps}], got {self.n_nonzero!r}"
            )

    @property
    def sparsity_ratio(self):
        return self.n_nonzero / self.n_taps


@dataclasses.dataclass(frozen=True)
class PhaseSpec:
    """Template for one phase: a fresh random system is drawn per trial."""

    span: int
    n_nonzero: int
    rho_p: Optional[float] = None

    def __post_init__(self):
        if self.span < 1:
            raise ParameterError(f"phase span must be >= 1, got {self.span!r}")
        if self.rho_p is not None and not (math.isfinite(self.rho_p) and self.rho_p >= 0):
            raise ParameterError(f"phase rho override must be >= 0, got {self.rho_p!r}")


DEFAULT_PHASES = (
    PhaseSpec(8000, 1, 0.0005),
    PhaseSpec(8000, 4, 0.0002),
    PhaseSpec(8000, 8, 0.0001),
)


@dataclasses.dataclass(frozen=True)
class Phase:
    system: np.ndarray
    span: int
    rho_p_override: Optional[float] = None


@dataclasses.dataclass(frozen=True)
class PhaseSchedule:
    """Piecewise-constant unknown system."""

    phases: Tuple[Phase, ...]

    def __post_init__(self):
        if not self.phases:
            raise ParameterError("a schedule needs at least one phase")
        n = len(self.phases[0].system)
        for phase in self.phases:
            if phase.span < 1:
                raise ParameterError(f"phase span must be >= 1, got {phase.span!r}")
            if len(phase.system) != n:
                raise DimensionError("all phase systems must have the same number of taps")
        object.__setattr__(self, "phases", tuple(self.phases))

    @property
    def n_taps(self):
        return len(self.phases[0].system)

    @property
    def spans(self):
        return tuple(phase.span for phase in self.phases)

    @property
    def total_length(self):
        return sum(self.spans)

    @property
    def starts(self):
        """Start iteration of every phase."""
        return tuple(np.cumsum((0,) + self.spans[:-1]).tolist())

    def system_matrix(self):
        """Per-iteration true system, shape ``(total_length, n_taps)``."""
        return np.repeat(np.stack([ph.system for ph in self.phases]), self.spans, axis=0)


@dataclasses.dataclass(frozen=True)
class RngStream:
    """Named, independent random stream.

    The generator is a PCG64 seeded from ``SeedSequence(seed,
    spawn_key=(trial, crc32(purpose)))``; equal triples always give the same
    samples on every platform.
    """

    seed: int
    trial: int = 0
    purpose: str = "default"

    def for_purpose(self, purpose):
        return dataclasses.replace(self, purpose=purpose)

    def for_trial(self, trial):
        return dataclasses.replace(self, trial=trial)

    def generator(self):
        tag = zlib.crc32(self.purpose.encode("utf-8"))
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.trial, tag))
        return np.random.Generator(np.random.PCG64(seq))


def _check_length(length):
    if length < 1:
        raise ParameterError(f"length must be >= 1, got {length!r}")


def gen_ar1_input(cfg, length, rng):
    """Unit-variance AR(1) sequence started from its stationary distribution."""
    _check_length(length)
    gen = rng.generator()
    sd = math.sqrt(cfg.stationary_variance)
    x0 = sd * gen.standard_normal()
    u = math.sqrt(cfg.innovation_variance) * gen.standard_normal(length - 1)
    x = np.empty(length)
    x[0] = x0
    if length > 1:
        x[1:] = lfilter([1.0], [1.0, -cfg.a], u, zi=[cfg.a * x0])[0]
    if cfg.normalize_mode is NormalizeMode.THEORETICAL:
        return x / sd
    std = x.std()
    if std == 0:
        raise ParameterError("cannot normalise a constant realisation")
    return x / std


def gen_noise(cfg, length, rng):
    """White Gaussian observation noise with ``cfg.variance``."""
    _check_length(length)
    return math.sqrt(cfg.variance) * rng.generator().standard_normal(length)


def gen_sparse_system(spec, rng):
    """Random ``+-1`` taps on a uniformly chosen support of size ``n_nonzero``."""
    gen = rng.generator()
    support = gen.choice(spec.n_taps, size=spec.n_nonzero, replace=False)
    w = np.zeros(spec.n_taps)
    w[support] = gen.choice(np.array([-1.0, 1.0]), size=spec.n_nonzero)
    return w


def draw_schedule(phases: Sequence[PhaseSpec], n_taps, rng):
    """Realise a schedule template, drawing phase ``j`` from stream ``system-phase-j``."""
    realised = []
    for j, spec in enumerate(phases, start=1):
        system = gen_sparse_system(
            SparseSystemSpec(n_taps, spec.n_nonzero), rng.for_purpose(f"system-phase-{j}")
        )
        realised.append(Phase(system, spec.span, spec.rho_p))
    return PhaseSchedule(tuple(realised))


def build_default_schedule(rng):
    """Three 8000-iteration phases over 16 taps with 1, 4 and 8 active taps."""
    return draw_schedule(DEFAULT_PHASES, 16, rng)


def synthesize_desired(system, x, noise_sample):
    """Noisy system output ``system . x + noise``."""
    return predict(system, x) + noise_sample


def regressors(signal, n_taps):
    """Tapped-delay-line regressors ``[x[k], x[k-1], ..., x[k-N+1]]``.

    Samples before time zero are taken as zero. Returns a read-only view of
    shape ``(len(signal), n_taps)``.
    """
    signal = np.asarray(signal, dtype=float)
    if signal.ndim != 1:
        raise DimensionError("signal must be 1-D")
    if n_taps < 1:
        raise ParameterError(f"n_taps must be >= 1, got {n_taps!r}")
    padded = np.concatenate([np.zeros(n_taps - 1), signal])
    return sliding_window_view(padded, n_taps)[:, ::-1]
