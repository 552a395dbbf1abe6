"""Flat ``key = value`` experiment configuration.

One key per line, ``#`` starts a comment, no sections.  Kind-specific keys
carry a namespace prefix (``decay.window_hi = 40``).  Every key has a
default; unknown keys, type mismatches and constraint violations are all
collected and reported together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigurationError
from .potentials import FAMILIES, PotentialSpec, PotentialTerm

KINDS = (
    "simulate", "decay", "scattering", "strichartz", "dispersive", "equivalence", "commutators",
    "resolvent", "heat-domination", "regular-point", "as-bound", "linf-interp",
)


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text: str) -> tuple:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _auto_int(text: str):
    return None if text.strip() == "auto" else int(text)


def _auto_float(text: str):
    return None if text.strip() == "auto" else float(text)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> (attribute, parser, type description)
_KEYS: dict[str, tuple[str, object, str]] = {}


def _key(name: str, parser, desc: str):
    attr = name.replace(".", "_").replace("-", "_")
    _KEYS[name] = (attr, parser, desc)
    return attr


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "decay"
    seed: int = 0
    out: str = "nlslab_out"
    n: int | None = None  # None: the experiment's own default grid
    L: float | None = None
    potential: str = "gaussian_bump"
    potential_c0: float = 1.0
    potential_w: float = 1.0
    potential_beta: float = 4.0
    p: float = 3.0
    re_lambda: float = 1.0
    im_lambda: float = 0.0
    epsilon: float = 0.05
    alpha: float = 1.5
    dt: float = 0.01
    t_end: float = 40.0
    profile_width: float = 1.0
    decay_window_lo: float = 1.0
    decay_window_hi: float = 40.0
    decay_sample_dt: float = 0.5
    decay_gamma_lo: float = 0.85
    decay_gamma_hi: float = 1.15
    decay_epsilon_scan: tuple = ()  # empty: no scan
    scattering_times: tuple = (5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0)
    scattering_tol: float = 1e-3
    strichartz_count: int = 50
    strichartz_T: float = 8.0
    strichartz_dt: float = 0.02
    strichartz_p: float = 4.0
    strichartz_q: float = 4.0
    strichartz_max_drift: float = 0.30
    dispersive_times: tuple = (2.0, 4.0, 8.0, 16.0, 20.0)
    equivalence_s_values: tuple = (0.25, 0.5, 0.75)
    equivalence_count: int = 100
    equivalence_refine_n: int = 128
    equivalence_max_drift: float = 0.20
    commutators_s_values: tuple = (0.5, 1.0, 1.5)
    commutators_t: float = 4.0
    resolvent_q: float = 4.0
    resolvent_s0: float = 0.5
    resolvent_taus: tuple = (0.0625, 0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
    heat_times: tuple = (0.5, 1.0, 2.0, 4.0)
    heat_C_max: float = 1.05
    regular_ns: tuple = (32, 48, 64)
    as_bound_s: float = 1.5
    as_bound_q: float = 2.0
    as_bound_ns: tuple = (32, 48, 64)
    linf_s: float = 1.5
    store_snapshots: bool = False

    # -- derived -----------------------------------------------------------

    @property
    def lam(self) -> complex:
        return complex(self.re_lambda, self.im_lambda)

    @property
    def potential_spec(self) -> PotentialSpec:
        if self.potential == "zero":
            return PotentialSpec.zero()
        return PotentialSpec((PotentialTerm(self.potential, self.potential_c0, self.potential_w,
                                            self.potential_beta),))

    def grid_or(self, n: int, L: float) -> tuple[int, float]:
        return (self.n if self.n is not None else n, self.L if self.L is not None else L)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        cfg = replace(self, **kw)
        errors = validate(cfg)
        if errors:
            raise ConfigurationError("; ".join(errors))
        return cfg


for _name, _parser, _desc in [
    ("experiment", str, "one of " + ", ".join(KINDS)),
    ("seed", int, "integer"),
    ("out", str, "path"),
    ("n", _auto_int, "integer or auto"),
    ("L", _auto_float, "number or auto"),
    ("potential", str, "one of " + ", ".join(FAMILIES)),
    ("potential.c0", float, "number"),
    ("potential.w", float, "number"),
    ("potential.beta", float, "number"),
    ("p", float, "number"),
    ("re_lambda", float, "number"),
    ("im_lambda", float, "number"),
    ("epsilon", float, "number"),
    ("alpha", float, "number"),
    ("dt", float, "number"),
    ("t_end", float, "number"),
    ("profile_width", float, "number"),
    ("decay.window_lo", float, "number"),
    ("decay.window_hi", float, "number"),
    ("decay.sample_dt", float, "number"),
    ("decay.gamma_lo", float, "number"),
    ("decay.gamma_hi", float, "number"),
    ("decay.epsilon_scan", _floats, "comma-separated numbers"),
    ("scattering.times", _floats, "comma-separated numbers"),
    ("scattering.tol", float, "number"),
    ("strichartz.count", int, "integer"),
    ("strichartz.T", float, "number"),
    ("strichartz.dt", float, "number"),
    ("strichartz.p", float, "number or inf"),
    ("strichartz.q", float, "number or inf"),
    ("strichartz.max_drift", float, "number"),
    ("dispersive.times", _floats, "comma-separated numbers"),
    ("equivalence.s_values", _floats, "comma-separated numbers"),
    ("equivalence.count", int, "integer"),
    ("equivalence.refine_n", int, "integer"),
    ("equivalence.max_drift", float, "number"),
    ("commutators.s_values", _floats, "comma-separated numbers"),
    ("commutators.t", float, "number"),
    ("resolvent.q", float, "number"),
    ("resolvent.s0", float, "number"),
    ("resolvent.taus", _floats, "comma-separated numbers"),
    ("heat.times", _floats, "comma-separated numbers"),
    ("heat.C_max", float, "number"),
    ("regular.ns", _ints, "comma-separated integers"),
    ("as_bound.s", float, "number"),
    ("as_bound.q", float, "number"),
    ("as_bound.ns", _ints, "comma-separated integers"),
    ("linf.s", float, "number"),
    ("store_snapshots", _bool, "true or false"),
]:
    _key(_name, _parser, _desc)

_ATTR_TO_KEY = {v[0]: k for k, v in _KEYS.items()}
assert set(_ATTR_TO_KEY) == {f.name for f in fields(ExperimentConfig)}, "config keys out of sync"


def validate(cfg: ExperimentConfig) -> list[str]:
    """Constraint violations, each naming its key."""
    e = []
    if cfg.experiment not in KINDS:
        e.append(f"experiment: unknown kind {cfg.experiment!r} (expected one of {', '.join(KINDS)})")
    if cfg.potential not in FAMILIES:
        e.append(f"potential: unknown family {cfg.potential!r}")
    if cfg.n is not None and cfg.n < 8:
        e.append("n: must be >= 8")
    if cfg.L is not None and not cfg.L > 0:
        e.append("L: must be positive")
    if not cfg.p > 2:
        e.append(f"p: p must exceed 2 (standing assumption p > 2), got {cfg.p:g}")
    if cfg.im_lambda > 0:
        e.append(f"im_lambda: must satisfy Imλ ≤ 0, got {cfg.im_lambda:g}")
    if cfg.epsilon < 0:
        e.append("epsilon: must be >= 0")
    if not 1 < cfg.alpha < 2:
        e.append(f"alpha: must lie in (1, 2), got {cfg.alpha:g}")
    if not cfg.dt > 0:
        e.append("dt: must be positive")
    if not cfg.t_end > 1:
        e.append("t_end: must exceed the start time 1")
    if not 0 < cfg.decay_window_lo < cfg.decay_window_hi:
        e.append("decay.window_lo/window_hi: need 0 < lo < hi")
    if cfg.decay_window_hi > cfg.t_end:
        e.append("decay.window_hi: must not exceed t_end")
    if any(not e > 0 for e in cfg.decay_epsilon_scan):
        e.append("decay.epsilon_scan: amplitudes must be positive")
    if cfg.decay_sample_dt < cfg.dt:
        e.append("decay.sample_dt: must be >= dt")
    if cfg.potential_c0 < 0 and cfg.potential != "zero":
        e.append("potential.c0: the decay theory needs V >= 0")
    if cfg.strichartz_count < 1 or cfg.equivalence_count < 1:
        e.append("strichartz.count/equivalence.count: must be >= 1")
    if not cfg.strichartz_T > 0:
        e.append("strichartz.T: must be positive")
    if not 0 < cfg.strichartz_dt <= cfg.strichartz_T:
        e.append("strichartz.dt: must lie in (0, strichartz.T]")
    for name in ("scattering_times", "dispersive_times", "resolvent_taus", "heat_times"):
        vals = getattr(cfg, name)
        if not vals or any(not v > 0 for v in vals):
            e.append(f"{_ATTR_TO_KEY[name]}: needs positive values")
    if any(not 0 < s < 2 for s in cfg.commutators_s_values):
        e.append("commutators.s_values: each s must lie in (0, 2)")
    if any(not 0 <= s < 1 for s in cfg.equivalence_s_values):
        e.append("equivalence.s_values: each s must lie in [0, 1)")
    if not 1 < cfg.as_bound_s < 2:
        e.append("as_bound.s: must lie in (1, 2)")
    if not 1 <= cfg.as_bound_q <= 2:
        e.append("as_bound.q: must lie in [1, 2]")
    if not 1 < cfg.linf_s < 2:
        e.append("linf.s: must lie in (1, 2)")
    return e


def parse_text(text: str, source: str = "<config>") -> ExperimentConfig:
    values = {}
    errors = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            errors.append(f"{source}:{lineno}: unknown key {key!r}")
            continue
        attr, parser, desc = _KEYS[key]
        try:
            values[attr] = parser(val)
        except ValueError:
            errors.append(f"{source}:{lineno}: {key}: expected {desc}, got {val!r}")
    cfg = ExperimentConfig(**values)
    errors += validate(cfg)
    if errors:
        err = ConfigurationError("\n".join(errors))
        err.errors = errors
        raise err
    return cfg


def parse_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {p}")
    return parse_text(p.read_text(), str(p))


def _format(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def serialize(cfg: ExperimentConfig) -> str:
    """Effective configuration as text; ``parse_text(serialize(c)) == c``."""
    lines = [f"{_ATTR_TO_KEY[f.name]} = {_format(getattr(cfg, f.name))}" for f in fields(cfg)]
    return "\n".join(lines) + "\n"
