"""
LMS-family update rules with optional p-norm sparsity penalty.

All updates are pure: they take the current weights, one regressor and one
desired sample, and return fresh weights without touching their inputs. The
same arithmetic kernel backs all four rules, which is what makes the
reductions (e.g. leaky LMS with zero leakage) bit-exact.

Arrays may carry leading batch dimensions; the tap axis is always the last
one. The public ``*_update`` functions operate on a single weight vector and
raise :class:`DivergenceError` on non-finite results, while :func:`adapt` is
the unchecked batched kernel used by the Monte-Carlo harness.
"""
import dataclasses
import enum
import math
from typing import NamedTuple, Optional

import numpy as np

from .exceptions import DimensionError, DivergenceError, ParameterError

__all__ = [
    "LeakSign",
    "FilterParams",
    "UpdateResult",
    "predict",
    "sgn",
    "lp_norm",
    "lp_penalty_gradient",
    "adapt",
    "lms_update",
    "llms_update",
    "lp_lms_update",
    "lp_llms_update",
    "UPDATE_RULES",
]


class LeakSign(enum.Enum):
    """Sign of the leakage term in the p-norm leaky update."""

    PLUS = "plus"
    MINUS = "minus"


@dataclasses.dataclass(frozen=True)
class FilterParams:
    """Hyperparameters shared by the four update rules.

    Parameters
    ----------
    mu : float
        Step size, must be positive.
    gamma : float
        Leakage factor.
    rho_p : float
        Combined penalty step ``mu * gamma_p``.
    epsilon_p : float
        Constant bounding the penalty near zero taps.
    p : float
        Norm exponent in (0, 1); only checked when ``rho_p > 0``.
    leak_sign : LeakSign
        Whether the p-norm leaky rule scales weights by ``1 + mu*gamma``
        (default) or ``1 - mu*gamma``.
    gamma_p : float, optional
        Penalty weight. When given, ``rho_p`` is derived from it; if both
        are given they must agree.
    """

    mu: float
    gamma: float = 0.0
    rho_p: float = 0.0
    epsilon_p: float = 0.0
    p: float = 0.5
    leak_sign: LeakSign = LeakSign.PLUS
    gamma_p: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ParameterError(f"mu must be a positive finite number, got {self.mu!r}")
        for name in ("gamma", "rho_p", "epsilon_p"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ParameterError(f"{name} must be finite and >= 0, got {value!r}")
        if not isinstance(self.leak_sign, LeakSign):
            object.__setattr__(self, "leak_sign", LeakSign(self.leak_sign))
        if self.gamma_p is not None:
            if not (math.isfinite(self.gamma_p) and self.gamma_p >= 0):
                raise ParameterError(f"gamma_p must be finite and >= 0, got {self.gamma_p!r}")
            rho = self.mu * self.gamma_p
            if not self.rho_p:
                object.__setattr__(self, "rho_p", rho)
            elif not math.isclose(self.rho_p, rho, rel_tol=1e-9):
                raise ParameterError(
                    f"rho_p={self.rho_p!r} is inconsistent with mu*gamma_p={rho!r}"
                )
        else:
            object.__setattr__(self, "gamma_p", self.rho_p / self.mu)
        if self.rho_p > 0 and not 0 < self.p < 1:
            raise ParameterError(f"p must lie in (0, 1) when the penalty is active, got {self.p!r}")

    def with_rho(self, rho_p):
        """Copy with a different penalty step (``gamma_p`` is re-derived)."""
        return dataclasses.replace(self, rho_p=float(rho_p), gamma_p=None)


class UpdateResult(NamedTuple):
    new_weights: np.ndarray
    error: float
    prediction: float


def _check_same_length(w, x):
    if w.shape[-1] != x.shape[-1]:
        raise DimensionError(f"length mismatch: weights have {w.shape[-1]} taps, input has {x.shape[-1]}")


def predict(w, x):
    """Filter output ``sum_i w_i * x_i`` along the last axis."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    _check_same_length(w, x)
    return np.sum(w * x, axis=-1)


def sgn(v):
    """Sign function with ``sgn(0) == 0``; element-wise on arrays."""
    return np.sign(v)


def _check_p(p):
    if not 0 < p < 1:
        raise ParameterError(f"p must lie in (0, 1), got {p!r}")


def lp_norm(w, p):
    """The p-(quasi)norm ``(sum |w_i|**p) ** (1/p)`` over the last axis."""
    _check_p(p)
    w = np.asarray(w, dtype=float)
    total = np.sum(np.abs(w) ** p, axis=-1, keepdims=True) ** (1.0 / p)
    return total[..., 0]


def _penalty_direction(w, p, epsilon_p):
    # ||w||_p^(1-p) * sgn(w_i) / (eps + |w_i|^(1-p)), 0 where w_i == 0
    # keepdims keeps the outer power on the array path; scalar ** rounds
    # differently, which would break batch/row bit equality
    a = np.abs(w)
    scale = np.sum(a**p, axis=-1, keepdims=True) ** ((1.0 - p) / p)
    sign = np.sign(w)
    denom = epsilon_p + a ** (1.0 - p)
    denom = np.where(sign == 0, 1.0, denom)
    return scale * sign / denom


def lp_penalty_gradient(w, p, epsilon_p):
    """Unscaled p-norm penalty direction, bounded per tap by ``epsilon_p``.

    For ``epsilon_p == 0`` this is exactly the gradient of :func:`lp_norm`
    at every tap with ``w_i != 0``. Zero taps always get zero.
    """
    _check_p(p)
    if epsilon_p < 0:
        raise ParameterError(f"epsilon_p must be >= 0, got {epsilon_p!r}")
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise DivergenceError("non-finite weights passed to lp_penalty_gradient")
    return _penalty_direction(w, p, epsilon_p)


def adapt(w, x, desired, mu, leak=1.0, rho_p=0.0, p=0.5, epsilon_p=0.0):
    """One unchecked update step, batched over leading axes.

    Computes ``leak*w + mu*e*x - rho_p*g(w)`` with ``e = desired - w.x``.

    Returns
    -------
    new_weights, error, prediction : ndarray
    """
    prediction = np.sum(w * x, axis=-1)
    error = desired - prediction
    new = leak * w + np.expand_dims(mu * error, -1) * x
    if rho_p:
        new = new - rho_p * _penalty_direction(w, p, epsilon_p)
    return new, error, prediction


def _leak_factor(params, sign):
    if sign is LeakSign.PLUS:
        return 1.0 + params.mu * params.gamma
    return 1.0 - params.mu * params.gamma


def _checked(w, x, desired, params, leak, rho_p, iteration):
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.ndim != 1 or x.ndim != 1:
        raise DimensionError("weights and input must be 1-D vectors")
    _check_same_length(w, x)
    with np.errstate(over="ignore", invalid="ignore"):
        new, error, prediction = adapt(
            w, x, float(desired), params.mu, leak, rho_p, params.p, params.epsilon_p
        )
    if not np.all(np.isfinite(new)):
        where = "" if iteration is None else f" at iteration {iteration}"
        raise DivergenceError(f"weights became non-finite{where}", iteration=iteration)
    return UpdateResult(new, float(error), float(prediction))


def lms_update(w, x, desired, params, iteration=None):
    """Plain LMS: ``w + mu*e*x``."""
    return _checked(w, x, desired, params, 1.0, 0.0, iteration)


def llms_update(w, x, desired, params, iteration=None):
    """Leaky LMS: ``(1 - mu*gamma)*w + mu*e*x``."""
    if params.gamma >= 1:
        raise ParameterError(f"leaky LMS needs 0 <= gamma < 1, got {params.gamma!r}")
    return _checked(w, x, desired, params, _leak_factor(params, LeakSign.MINUS), 0.0, iteration)


def lp_lms_update(w, x, desired, params, iteration=None):
    """LMS with the p-norm zero attractor."""
    return _checked(w, x, desired, params, 1.0, params.rho_p, iteration)


def lp_llms_update(w, x, desired, params, iteration=None):
    """Leaky LMS with the p-norm zero attractor.

    The leakage factor is ``1 + mu*gamma`` unless ``params.leak_sign`` is
    ``MINUS``.
    """
    leak = _leak_factor(params, params.leak_sign)
    return _checked(w, x, desired, params, leak, params.rho_p, iteration)


UPDATE_RULES = {
    "lms": lms_update,
    "llms": llms_update,
    "lp_lms": lp_lms_update,
    "lp_llms": lp_llms_update,
}


def kernel_arguments(kind, params):
    """Map an update-rule name and its parameters onto :func:`adapt` keywords."""
    if kind == "lms":
        leak, rho = 1.0, 0.0
    elif kind == "llms":
        leak, rho = _leak_factor(params, LeakSign.MINUS), 0.0
    elif kind == "lp_lms":
        leak, rho = 1.0, params.rho_p
    elif kind == "lp_llms":
        leak, rho = _leak_factor(params, params.leak_sign), params.rho_p
    else:
        raise ParameterError(f"unknown update rule {kind!r}; expected one of {sorted(UPDATE_RULES)}")
    return dict(mu=params.mu, leak=leak, rho_p=rho, p=params.p, epsilon_p=params.epsilon_p)
