"""
scikit-learn compatible wrappers around the adaptive update rules.

The filters are online regressors: ``fit`` starts from zero weights and
makes one update per row of ``X`` in order, ``partial_fit`` continues from
the current weights. Rows of ``X`` are regressor vectors; use
:class:`TappedDelayLine` to build them from a raw input signal::

    pipe = make_pipeline(TappedDelayLine(16), LpLeakyLMSFilter())
    pipe.fit(signal.reshape(-1, 1), desired)
"""
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .filters import FilterParams, LeakSign, UPDATE_RULES, predict
from .signals import regressors

__all__ = [
    "TappedDelayLine",
    "LMSFilter",
    "LeakyLMSFilter",
    "LpLMSFilter",
    "LpLeakyLMSFilter",
]


class TappedDelayLine(TransformerMixin, BaseEstimator):
    """Expand each input column into tapped-delay-line regressors.

    Rows of ``X`` are consecutive time samples. For a single column the
    output row ``k`` is ``[x[k], x[k-1], ..., x[k-n_taps+1]]`` with zeros
    before the first sample; several columns give one such block per
    column, side by side.

    Parameters
    ----------
    n_taps : int, default=16
    """

    def __init__(self, n_taps=16):
        self.n_taps = n_taps

    def fit(self, X, y=None):
        validate_data(self, X, reset=True)
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = validate_data(self, X, reset=False)
        blocks = [regressors(X[:, j], self.n_taps) for j in range(X.shape[1])]
        return np.ascontiguousarray(np.hstack(blocks))

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "n_features_in_")
        names = input_features if input_features is not None else [
            f"x{j}" for j in range(self.n_features_in_)
        ]
        return np.array([f"{name}_lag{k}" for name in names for k in range(self.n_taps)], dtype=object)


class _AdaptiveFilter(RegressorMixin, BaseEstimator):
    _kind = None

    def _filter_params(self):
        raise NotImplementedError

    def fit(self, X, y):
        """Adapt from zero weights over the rows of ``X`` in order."""
        X, y = validate_data(self, X, y, reset=True, y_numeric=True)
        self.coef_ = np.zeros(X.shape[1])
        self.n_iter_ = 0
        self.errors_ = np.empty(0)
        return self._run(X, y)

    def partial_fit(self, X, y):
        """Continue adapting from the current weights."""
        first = not hasattr(self, "coef_")
        X, y = validate_data(self, X, y, reset=first, y_numeric=True)
        if first:
            self.coef_ = np.zeros(X.shape[1])
            self.n_iter_ = 0
            self.errors_ = np.empty(0)
        return self._run(X, y)

    def _run(self, X, y):
        params = self._filter_params()
        update = UPDATE_RULES[self._kind]
        w = self.coef_
        errors = np.empty(len(y))
        for k in range(len(y)):
            w, errors[k], _ = update(w, X[k], y[k], params, iteration=self.n_iter_ + k)
        self.coef_ = w
        self.n_iter_ += len(y)
        self.errors_ = np.concatenate([self.errors_, errors])
        return self

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        # a single online pass does not reach batch least-squares accuracy
        tags.regressor_tags.poor_score = True
        return tags

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, reset=False)
        return predict(self.coef_, X)


class LMSFilter(_AdaptiveFilter):
    """Least-mean-squares filter.

    Parameters
    ----------
    mu : float, default=0.015
        Step size.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
        Current weights.
    errors_ : ndarray
        A-priori error of every update made so far.
    n_iter_ : int
        Number of updates made so far.
    """

    _kind = "lms"

    def __init__(self, mu=0.015):
        self.mu = mu

    def _filter_params(self):
        return FilterParams(mu=self.mu)


class LeakyLMSFilter(_AdaptiveFilter):
    """LMS with weight leakage ``(1 - mu*gamma)``.

    Parameters
    ----------
    mu : float, default=0.015
    gamma : float, default=0.005
        Leakage factor in [0, 1).
    """

    _kind = "llms"

    def __init__(self, mu=0.015, gamma=0.005):
        self.mu = mu
        self.gamma = gamma

    def _filter_params(self):
        return FilterParams(mu=self.mu, gamma=self.gamma, leak_sign=LeakSign.MINUS)


class LpLMSFilter(_AdaptiveFilter):
    """LMS with a p-norm zero attractor for sparse systems.

    Parameters
    ----------
    mu : float, default=0.015
    rho_p : float, default=0.0005
        Penalty step (step size times penalty weight).
    epsilon_p : float, default=10.0
        Bounds the attraction applied to small taps.
    p : float, default=0.5
        Norm exponent in (0, 1).
    """

    _kind = "lp_lms"

    def __init__(self, mu=0.015, rho_p=0.0005, epsilon_p=10.0, p=0.5):
        self.mu = mu
        self.rho_p = rho_p
        self.epsilon_p = epsilon_p
        self.p = p

    def _filter_params(self):
        return FilterParams(mu=self.mu, rho_p=self.rho_p, epsilon_p=self.epsilon_p, p=self.p)


class LpLeakyLMSFilter(_AdaptiveFilter):
    """Leaky LMS with a p-norm zero attractor.

    With the default ``leak_sign="plus"`` the weights are scaled by
    ``1 + mu*gamma`` each step, which offsets the shrinkage the penalty
    applies to large taps. ``"minus"`` gives conventional leakage.

    Parameters
    ----------
    mu : float, default=0.015
    gamma : float, default=0.005
    rho_p : float, default=0.0005
    epsilon_p : float, default=10.0
    p : float, default=0.5
    leak_sign : {"plus", "minus"}, default="plus"
    """

    _kind = "lp_llms"

    def __init__(self, mu=0.015, gamma=0.005, rho_p=0.0005, epsilon_p=10.0, p=0.5, leak_sign="plus"):
        self.mu = mu
        self.gamma = gamma
        self.rho_p = rho_p
        self.epsilon_p = epsilon_p
        self.p = p
        self.leak_sign = leak_sign

    def _filter_params(self):
        return FilterParams(
            mu=self.mu,
            gamma=self.gamma,
            rho_p=self.rho_p,
            epsilon_p=self.epsilon_p,
            p=self.p,
            leak_sign=LeakSign(self.leak_sign),
        )
