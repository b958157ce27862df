"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Vectors that must share a length do not."""


class ParameterError(ValueError):
    """A hyperparameter or configuration value is out of its valid range."""


class DivergenceError(FloatingPointError):
    """An adaptive update produced non-finite weights.

    Parameters
    ----------
    message : str
        Human readable description.
    iteration : int, optional
        Iteration index at which the weights became non-finite.
    trial : int, optional
        Monte-Carlo trial index, when raised from the experiment harness.
    """

    def __init__(self, message, iteration=None, trial=None):
        super().__init__(message)
        self.iteration = iteration
        self.trial = trial


class ConfigError(ValueError):
    """A configuration file could not be parsed or violates an invariant."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line
