"""Experiment configuration documents.

A document is INI-style ``key = value`` lines grouped in sections::

    [experiment]
    name = okounkov
    seed = 12

    [ensemble]
    beta = 2
    t = 1

Keys may also appear before the first section header. Every key has one
home section; unknown keys, keys in the wrong section, missing required
keys and malformed values are rejected with the key name and line number.
"""

import configparser
import math
import re
from dataclasses import asdict, dataclass, field, replace

from .exceptions import ConfigError

EXPERIMENTS = (
    "semicircle",
    "clt",
    "ensemble-trace",
    "trace-agreement",
    "kernel",
    "trace-mc",
    "excursion-identity",
    "okounkov",
    "semigroup-check",
)

# experiments driven by Brownian paths default to a coarser time grid
_KERNEL_EXPERIMENTS = ("kernel", "trace-mc", "semigroup-check")
_U64 = 1 << 64


@dataclass(frozen=True)
class GridConfig:
    n_grid: int = None
    delta: float = None
    delta_a: float = 1.0 / 256.0
    a_max: float = None
    x_max: float = None
    x_step: float = 0.05
    z_step: float = 0.1


@dataclass(frozen=True)
class SampleConfig:
    n_matrices: int = 500
    n_paths: int = 1000
    n_w_grids: int = 200
    n_samples: int = 100000
    replicates: int = 40


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description with all defaults filled in."""

    experiment: str
    seed: int
    beta: float = 2.0
    n: int = 1000
    t: float = 1.0
    window: tuple = (0.0, math.inf)
    grids: GridConfig = field(default_factory=GridConfig)
    samples: SampleConfig = field(default_factory=SampleConfig)
    threads: int = None
    options: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        return _jsonable(d)

    def with_overrides(self, seed=None, threads=None):
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=_parse_u64("seed", str(seed), None))
        if threads is not None:
            cfg = replace(cfg, threads=threads)
        return cfg


def _jsonable(obj):
    if isinstance(obj, float) and math.isinf(obj):
        return "inf" if obj > 0 else "-inf"
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


# ------------------------------------------------------------- parsers ---


def _parse_float(key, text, line, allow_inf=False):
    raw = text.strip().lower()
    if raw in ("inf", "+inf", "infinity"):
        if allow_inf:
            return math.inf
        raise ConfigError("infinite value not allowed", key, line)
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"expected a real number, got {text!r}", key, line) from None
    if not math.isfinite(value):
        raise ConfigError(f"expected a finite real number, got {text!r}", key, line)
    return value


def _parse_int(key, text, line):
    raw = text.strip()
    if not re.fullmatch(r"[+-]?\d+", raw):
        raise ConfigError(f"expected an integer, got {text!r}", key, line)
    return int(raw)


def _parse_u64(key, text, line):
    value = _parse_int(key, text, line)
    if not 0 <= value < _U64:
        raise ConfigError("expected an unsigned 64-bit integer", key, line)
    return value


def _positive(parse):
    def inner(key, text, line):
        value = parse(key, text, line)
        if not value > 0:
            raise ConfigError(f"must be positive, got {value}", key, line)
        return value

    return inner


def _nonnegative_float(key, text, line):
    value = _parse_float(key, text, line)
    if value < 0:
        raise ConfigError(f"must be nonnegative, got {value}", key, line)
    return value


def _beta(key, text, line):
    value = _parse_float(key, text, line, allow_inf=True)
    if not value > 0:
        raise ConfigError(f"must be positive, got {value}", key, line)
    return value


def _window(key, text, line):
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    if len(parts) != 2:
        raise ConfigError("window needs two bounds 'lower, upper'", key, line)
    lo = -math.inf if parts[0].lower() == "-inf" else _parse_float(key, parts[0], line)
    hi = _parse_float(key, parts[1], line, allow_inf=True)
    if lo > hi:
        raise ConfigError("window lower bound exceeds upper bound", key, line)
    return (lo, hi)


def _list(parse):
    def inner(key, text, line):
        parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
        if not parts:
            raise ConfigError("expected a nonempty list", key, line)
        return [parse(key, p, line) for p in parts]

    return inner


def _cases(key, text, line):
    out = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        parts = [p for p in re.split(r"[,\s]+", chunk.strip()) if p]
        if len(parts) != 4:
            raise ConfigError("each case is 'k, k_prime, alpha, alpha_prime'", key, line)
        k, kp = (_positive(_parse_int)(key, p, line) for p in parts[:2])
        a, ap = (_parse_float(key, p, line) for p in parts[2:])
        if not (0 < a <= 1 and 0 < ap <= 1):
            raise ConfigError("alphas must lie in (0, 1]", key, line)
        out.append([k, kp, a, ap])
    if not out:
        raise ConfigError("expected at least one case", key, line)
    return out


def _parity(key, text, line):
    value = text.strip().lower()
    if value not in ("both", "even", "odd"):
        raise ConfigError("parity must be both, even or odd", key, line)
    return value


def _name(key, text, line):
    value = text.strip()
    if value not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {value!r}", key, line)
    return value


_pos_int = _positive(_parse_int)
_pos_float = _positive(_parse_float)

# key -> (section, parser)
SCHEMA = {
    "name": ("experiment", _name),
    "experiment": ("experiment", _name),
    "seed": ("experiment", _parse_u64),
    "threads": ("experiment", _pos_int),
    "beta": ("ensemble", _beta),
    "n": ("ensemble", _pos_int),
    "ns": ("ensemble", _list(_pos_int)),
    "t": ("ensemble", _pos_float),
    "ts": ("ensemble", _list(_pos_float)),
    "t1": ("ensemble", _pos_float),
    "t2": ("ensemble", _nonnegative_float),
    "window": ("ensemble", _window),
    "n_grid": ("grids", _pos_int),
    "delta": ("grids", _pos_float),
    "delta_a": ("grids", _pos_float),
    "a_max": ("grids", _pos_float),
    "x_max": ("grids", _pos_float),
    "x_step": ("grids", _pos_float),
    "z_step": ("grids", _pos_float),
    "n_matrices": ("samples", _positive(_parse_int)),
    "n_paths": ("samples", _positive(_parse_int)),
    "n_w_grids": ("samples", _positive(_parse_int)),
    "n_samples": ("samples", _positive(_parse_int)),
    "replicates": ("samples", _positive(_parse_int)),
    "ks": ("query", _list(_pos_int)),
    "cases": ("query", _cases),
    "x": ("query", _nonnegative_float),
    "y": ("query", _nonnegative_float),
    "parity": ("query", _parity),
    "points": ("query", _list(_nonnegative_float)),
}

_PREAMBLE = "__top__"
_OPTION_KEYS = ("ns", "ts", "t1", "t2", "ks", "cases", "x", "y", "parity", "points")

# experiment -> keys that must be present
REQUIRED = {name: ("seed",) for name in EXPERIMENTS}

# experiment-specific defaults
DEFAULTS = {
    "semicircle": {"n": 2000, "n_matrices": 200, "ks": [2, 4, 6]},
    "clt": {"n": 2000, "n_matrices": 2000,
            "cases": [[1, 1, 1.0, 1.0], [2, 2, 1.0, 1.0], [1, 1, 0.5, 1.0], [1, 2, 1.0, 1.0]]},
    "ensemble-trace": {"n": 1000, "n_matrices": 500},
    "trace-agreement": {"ns": [200, 500, 1000], "n_matrices": 500},
    "kernel": {"x": 0.0, "y": 0.0, "parity": "both", "n_paths": 5000},
    "trace-mc": {"n_paths": 1000, "n_w_grids": 200, "n_samples": 20000},
    "excursion-identity": {"n_samples": 100000},
    "okounkov": {"n_samples": 100000},
    "semigroup-check": {"t1": 0.5, "t2": 0.5, "points": [0.5, 1.0, 1.5, 2.0, 2.5],
                        "n_paths": 64, "replicates": 40},
}


def _key_lines(text):
    """Map ``(section, key)`` to the 1-based line where it is set."""
    lines = {}
    section = _PREAMBLE
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), no)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", s)
        if m:
            lines[(section, m.group(1).strip().lower())] = no
    return lines


def parse_config(text, experiment=None):
    """Parse and validate a configuration document.

    ``experiment`` supplies the experiment name when the document has none;
    if both are given they must agree.

    Raises
    ------
    ConfigError
        On syntax errors, unknown or misplaced keys, bad values and
        missing required keys.
    """
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"), default_section="__defaults_unused__"
    )
    try:
        parser.read_string(f"[{_PREAMBLE}]\n" + text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError("duplicate key", exc.option, exc.lineno - 1) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError("duplicate section", exc.section, (exc.lineno or 1) - 1) from None
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(f"malformed document: {exc.message.splitlines()[0]}", None,
                          None if line is None else line - 1) from None
    lines = _key_lines(text)
    values = {}
    where = {}
    for section in parser.sections():
        known = {s for s, _ in SCHEMA.values()}
        if section != _PREAMBLE and section not in known:
            raise ConfigError("unknown section", section, lines.get((section, None)))
        for key, raw in parser.items(section):
            line = lines.get((section, key))
            if key not in SCHEMA:
                raise ConfigError("unknown key", key, line)
            home, parse = SCHEMA[key]
            if section not in (_PREAMBLE, home):
                raise ConfigError(f"key belongs in section [{home}]", key, line)
            canonical = "name" if key == "experiment" else key
            if canonical in values:
                raise ConfigError("key given twice", key, line)
            values[canonical] = parse(key, raw, line)
            where[canonical] = line
    if experiment is not None:
        experiment = _name("experiment", experiment, None)
        if values.setdefault("name", experiment) != experiment:
            raise ConfigError(f"document is for {values['name']!r}, not {experiment!r}", "name",
                              where.get("name"))
    if "name" not in values:
        raise ConfigError("missing required key", "name")
    name = values["name"]
    for key in REQUIRED[name]:
        if key not in values:
            raise ConfigError("missing required key", key)
    merged = dict(DEFAULTS[name])
    merged.update(values)
    if name == "semigroup-check" and "t" in values:
        raise ConfigError("semigroup-check uses t1 and t2, not t", "t", where["t"])
    for key in ("ks",):
        if key in merged and max(merged[key]) > 64:
            raise ConfigError("powers above 64 are not supported", key, where.get(key))
    # excursions live on [0, 1], so the level bin default is sqrt(1) / 256
    grid_defaults = GridConfig(n_grid=1024 if name in _KERNEL_EXPERIMENTS else 4096,
                               delta=1.0 / 256.0)
    grids = replace(grid_defaults, **{k: merged[k] for k in GridConfig.__dataclass_fields__ if k in merged})
    samples = SampleConfig(**{k: merged[k] for k in SampleConfig.__dataclass_fields__ if k in merged})
    options = {k: merged[k] for k in _OPTION_KEYS if k in merged}
    top = {k: merged[k] for k in ("beta", "n", "t", "window", "threads") if k in merged}
    cfg = ExperimentConfig(name, merged["seed"], grids=grids, samples=samples, options=options, **top)
    if math.isinf(cfg.beta) and name in ("semicircle", "clt", "ensemble-trace", "trace-agreement"):
        raise ConfigError("beta = inf is only meaningful for path experiments", "beta", where.get("beta"))
    return cfg


def load_config(path, experiment=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), experiment)
