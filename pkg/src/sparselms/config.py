"""
Flat ``key = value`` experiment configuration files.

Blank lines and ``#`` comments are ignored. Every key is optional; missing
keys take the default experiment values. Recognised keys::

    seed                     integer in [0, 2**64)
    trials                   number of Monte-Carlo trials
    taps                     filter / system length
    phase_lengths            comma list of iterations per phase
    sparsity                 comma list of nonzero taps per phase
    phase_rho                comma list of per-phase rho overrides, or "none"
    steady_state_window      trailing iterations averaged per phase
    ar1.a                    AR(1) coefficient
    ar1.innovation_variance  variance of the AR(1) driving noise
    ar1.normalize_mode       theoretical | empirical
    noise.variance           observation noise variance
    algorithms               comma list of algorithm names
    <name>.kind              lms | llms | lp_lms | lp_llms (default: <name>)
    <name>.mu  <name>.gamma  <name>.rho  <name>.gamma_p
    <name>.epsilon  <name>.p  <name>.leak_sign

Per-algorithm keys are only accepted where the update rule uses them.
"""
import math

from .exceptions import ConfigError
from .experiment import AlgorithmSpec, ExperimentConfig, default_algorithms
from .filters import UPDATE_RULES, FilterParams, LeakSign
from .signals import DEFAULT_PHASES, Ar1Config, NoiseConfig, NormalizeMode, PhaseSpec

__all__ = ["parse_config", "load_config", "render_config", "DEFAULT_CONFIG"]

DEFAULT_CONFIG = ExperimentConfig()

_GLOBAL_KEYS = {
    "seed",
    "trials",
    "taps",
    "phase_lengths",
    "sparsity",
    "phase_rho",
    "steady_state_window",
    "ar1.a",
    "ar1.innovation_variance",
    "ar1.normalize_mode",
    "noise.variance",
    "algorithms",
}

# filter-parameter key -> FilterParams field
_PARAM_FIELDS = {
    "mu": "mu",
    "gamma": "gamma",
    "rho": "rho_p",
    "gamma_p": "gamma_p",
    "epsilon": "epsilon_p",
    "p": "p",
    "leak_sign": "leak_sign",
}

_KIND_KEYS = {
    "lms": {"mu"},
    "llms": {"mu", "gamma"},
    "lp_lms": {"mu", "rho", "gamma_p", "epsilon", "p"},
    "lp_llms": {"mu", "gamma", "rho", "gamma_p", "epsilon", "p", "leak_sign"},
}

_KIND_DEFAULTS = {alg.kind: alg.params for alg in default_algorithms()}


def _tokenize(text):
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=lineno)
        if key in entries:
            raise ConfigError(f"duplicate key (first set on line {entries[key][1]})", key, lineno)
        entries[key] = (value, lineno)
    return entries


class _Reader:
    def __init__(self, entries):
        self.entries = entries
        self.used = set()

    def get(self, key, convert, default):
        if key not in self.entries:
            return default
        self.used.add(key)
        value, line = self.entries[key]
        try:
            return convert(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cannot parse {value!r}: {exc}", key, line) from None

    def line(self, key):
        return self.entries[key][1] if key in self.entries else None

    def fail(self, key, message):
        raise ConfigError(message, key, self.line(key))


def _float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("value must be finite")
    return value


def _int(text):
    return int(text)


def _list(convert):
    def parse(text):
        items = [item.strip() for item in text.split(",")]
        if not all(items):
            raise ValueError("empty list item")
        return tuple(convert(item) for item in items)

    return parse


def _rho_list(text):
    if text.strip().lower() == "none":
        return None
    return _list(_float)(text)


def _names(text):
    return _list(str)(text)


def parse_config(text):
    """Build an :class:`ExperimentConfig` from configuration text.

    Raises
    ------
    ConfigError
        On unknown keys, unparseable values or out-of-range parameters; the
        message names the key and line.
    """
    reader = _Reader(_tokenize(text))
    default = DEFAULT_CONFIG

    seed = reader.get("seed", _int, default.seed)
    if not 0 <= seed < 2**64:
        reader.fail("seed", f"seed must lie in [0, 2**64), got {seed}")
    trials = reader.get("trials", _int, default.n_trials)
    if trials < 1:
        reader.fail("trials", f"trials must be >= 1, got {trials}")
    taps = reader.get("taps", _int, default.n_taps)
    if taps < 1:
        reader.fail("taps", f"taps must be >= 1, got {taps}")

    lengths = reader.get("phase_lengths", _list(_int), None)
    sparsity = reader.get("sparsity", _list(_int), None)
    rhos = reader.get("phase_rho", _rho_list, ())
    given = [v for v in (lengths, sparsity, rhos) if v]
    n_phases = len(given[0]) if given else len(DEFAULT_PHASES)
    default_shape = n_phases == len(DEFAULT_PHASES)
    if lengths is None:
        lengths = (DEFAULT_PHASES[0].span,) * n_phases
    if sparsity is None:
        if not default_shape:
            reader.fail("phase_lengths", "sparsity must be given when the phase count is not 3")
        sparsity = tuple(spec.n_nonzero for spec in DEFAULT_PHASES)
    if rhos == ():
        rhos = tuple(spec.rho_p for spec in DEFAULT_PHASES) if default_shape else None
    if rhos is None:
        rhos = (None,) * n_phases
    for key, values in (("phase_lengths", lengths), ("sparsity", sparsity), ("phase_rho", rhos)):
        if len(values) != n_phases:
            reader.fail(key, f"expected {n_phases} phase entries, got {len(values)}")
    phases = []
    for span, count, rho in zip(lengths, sparsity, rhos):
        if span < 1:
            reader.fail("phase_lengths", f"phase lengths must be >= 1, got {span}")
        if not 1 <= count <= taps:
            reader.fail("sparsity", f"sparsity must lie in [1, {taps}], got {count}")
        if rho is not None and rho < 0:
            reader.fail("phase_rho", f"rho overrides must be >= 0, got {rho}")
        phases.append(PhaseSpec(span, count, rho))

    window = reader.get("steady_state_window", _int, min(default.steady_state_window, *lengths))
    if not 1 <= window <= min(lengths):
        reader.fail("steady_state_window", f"window must lie in [1, {min(lengths)}], got {window}")

    try:
        ar1 = Ar1Config(
            a=reader.get("ar1.a", _float, default.ar1.a),
            innovation_variance=reader.get(
                "ar1.innovation_variance", _float, default.ar1.innovation_variance
            ),
            normalize_mode=reader.get("ar1.normalize_mode", NormalizeMode, default.ar1.normalize_mode),
        )
    except ValueError as exc:
        key = "ar1.a" if "coefficient" in str(exc) else "ar1.innovation_variance"
        reader.fail(key, str(exc))
    try:
        noise = NoiseConfig(reader.get("noise.variance", _float, default.noise.variance))
    except ValueError as exc:
        reader.fail("noise.variance", str(exc))

    names = reader.get("algorithms", _names, tuple(alg.name for alg in default.algorithms))
    if len(set(names)) != len(names):
        reader.fail("algorithms", f"algorithm names must be unique, got {list(names)}")
    algorithms = tuple(_parse_algorithm(reader, name) for name in names)

    unknown = sorted(set(reader.entries) - reader.used, key=reader.line)
    if unknown:
        reader.fail(unknown[0], "unknown key")

    return ExperimentConfig(
        ar1=ar1,
        noise=noise,
        n_taps=taps,
        phases=tuple(phases),
        algorithms=algorithms,
        n_trials=trials,
        seed=seed,
        steady_state_window=window,
    )


def _parse_algorithm(reader, name):
    kind = reader.get(f"{name}.kind", str, name)
    if kind not in UPDATE_RULES:
        key = f"{name}.kind" if f"{name}.kind" in reader.entries else "algorithms"
        reader.fail(key, f"unknown update rule {kind!r}; expected one of {sorted(UPDATE_RULES)}")
    for key in reader.entries:
        prefix, _, field = key.partition(".")
        if prefix == name and field != "kind" and field not in _KIND_KEYS[kind]:
            reader.fail(key, f"parameter not used by update rule {kind!r}")

    defaults = _KIND_DEFAULTS[kind]
    values = {}
    for field in _KIND_KEYS[kind]:
        attr = _PARAM_FIELDS[field]
        convert = LeakSign if field == "leak_sign" else _float
        values[attr] = reader.get(f"{name}.{field}", convert, None)
    kwargs = {
        "mu": values["mu"] if values["mu"] is not None else defaults.mu,
        "gamma": defaults.gamma,
        "p": defaults.p,
        "epsilon_p": defaults.epsilon_p,
        "leak_sign": defaults.leak_sign,
    }
    for attr in ("gamma", "p", "epsilon_p", "leak_sign"):
        if values.get(attr) is not None:
            kwargs[attr] = values[attr]
    if "rho_p" in values:
        rho, gamma_p = values["rho_p"], values["gamma_p"]
        if rho is None and gamma_p is None:
            rho = defaults.rho_p
        kwargs["rho_p"] = rho if rho is not None else 0.0
        kwargs["gamma_p"] = gamma_p
    try:
        return AlgorithmSpec(name, kind, FilterParams(**kwargs))
    except ValueError as exc:
        message = str(exc)
        field = next(
            (f for f, attr in _PARAM_FIELDS.items() if message.startswith(attr + " ")),
            "mu",
        )
        reader.fail(f"{name}.{field}", message)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _join(values):
    return ", ".join(repr(v) for v in values)


def render_config(cfg):
    """Serialise a config so that ``parse_config(render_config(cfg)) == cfg``.

    Configs carrying an explicit fixed ``schedule`` cannot be rendered.
    """
    if cfg.schedule is not None:
        raise ValueError("configs with a fixed schedule have no file representation")
    rhos = [spec.rho_p for spec in cfg.phases]
    if all(r is None for r in rhos):
        rho_text = "none"
    elif any(r is None for r in rhos):
        raise ValueError("phase rho overrides must be set for all phases or none")
    else:
        rho_text = _join(rhos)
    lines = [
        f"seed = {cfg.seed}",
        f"trials = {cfg.n_trials}",
        f"taps = {cfg.n_taps}",
        f"phase_lengths = {', '.join(str(s.span) for s in cfg.phases)}",
        f"sparsity = {', '.join(str(s.n_nonzero) for s in cfg.phases)}",
        f"phase_rho = {rho_text}",
        f"steady_state_window = {cfg.steady_state_window}",
        f"ar1.a = {cfg.ar1.a!r}",
        f"ar1.innovation_variance = {cfg.ar1.innovation_variance!r}",
        f"ar1.normalize_mode = {cfg.ar1.normalize_mode.value}",
        f"noise.variance = {cfg.noise.variance!r}",
        f"algorithms = {', '.join(alg.name for alg in cfg.algorithms)}",
    ]
    for alg in cfg.algorithms:
        params = alg.params
        lines.append(f"{alg.name}.kind = {alg.kind}")
        for field in sorted(_KIND_KEYS[alg.kind]):
            value = getattr(params, _PARAM_FIELDS[field])
            text = value.value if field == "leak_sign" else repr(value)
            lines.append(f"{alg.name}.{field} = {text}")
    return "\n".join(lines) + "\n"
