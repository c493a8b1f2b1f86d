"""Experiment configuration: ``key=value`` files, flag overrides and validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .exponents import ExponentConfig, ExponentError

EXPERIMENTS = (
    "sharpness-k",
    "sharpness-theta",
    "reduce-fuzz",
    "dominate-demo",
    "maximal-equiv",
    "weights-report",
)

# keys that feed ExponentConfig; lists are comma separated, slot lists 1-based
EXPONENT_KEYS = ("m", "eta", "r", "s", "s_prime", "p", "q", "z", "k", "t", "tau", "tau_prime")
FIXED_EXPONENTS = ("sharpness-k", "sharpness-theta", "reduce-fuzz", "dominate-demo")

KEYS = {
    "experiment": str,
    "L": int,
    "shift": float,
    "seed": int,
    "out": str,
    "format": str,
    "lambda": "floats",
    "delta": "floats",
    "J": int,
    "trials": int,
    "plots": "bool",
    "m": int,
    "eta": float,
    "r": "floats",
    "s": float,
    "s_prime": float,
    "p": "floats",
    "q": float,
    "z": float,
    "k": "ints",
    "t": "ints",
    "tau": "ints",
    "tau_prime": "ints",
}
ALIASES = {"grid_L": "L", "grid-L": "L", "lambdas": "lambda", "deltas": "delta",
           "sPrime": "s_prime", "s'": "s_prime", "tauPrime": "tau_prime"}


class ConfigError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


def _parse_float(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "infinity", "oo"):
        return math.inf
    if "/" in t:
        a, b = t.split("/", 1)
        return float(a) / float(b)
    return float(t)


def _convert(key: str, raw):
    kind = KEYS[key]
    if not isinstance(raw, str):
        return raw
    if kind is str:
        return raw.strip()
    if kind is int:
        return int(raw.strip())
    if kind is float:
        return _parse_float(raw)
    if kind == "bool":
        v = raw.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    parts = [p for p in raw.replace(";", ",").split(",") if p.strip()]
    if kind == "floats":
        return tuple(_parse_float(p) for p in parts)
    return tuple(int(p.strip()) for p in parts)


def read_config_file(path: str | Path) -> dict:
    """``key=value`` lines; ``#`` starts a comment; blank lines ignored."""
    out = {}
    errors = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {n}: expected key=value, got {line!r}")
            continue
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    if errors:
        raise ConfigError(errors)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    L: int = 14
    shift: float = 0.0
    seed: int = 0
    out: str = "out"
    format: str = "csv"
    lambdas: tuple = ()
    deltas: tuple = ()
    J: int | None = None
    trials: int | None = None
    plots: bool = True
    exponents: dict = field(default_factory=dict)

    def exponent_config(self, **defaults) -> ExponentConfig:
        """User exponents on top of experiment defaults (slot lists converted to 0-based).

        Tuple defaults of length one are broadcast to the arity implied by the
        user's values.
        """
        user = self.exponents
        m = user.get("m", len(user.get("p", ())) or len(user.get("r", ())) or defaults.get("m", 1))
        kw = {k: (v * m if isinstance(v, tuple) and len(v) == 1 else v) for k, v in defaults.items()}
        kw["m"] = m
        kw.update(user)
        for key in ("tau", "tau_prime"):
            if key in self.exponents and kw[key] is not None:
                kw[key] = frozenset(i - 1 for i in kw[key])
        return ExponentConfig(**kw)


def parse_config(path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Merge file values and flag overrides, validate everything and report every violation."""
    raw = read_config_file(path) if path else {}
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    errors = []
    vals = {}
    for key, v in raw.items():
        key = ALIASES.get(key, key)
        if key not in KEYS:
            errors.append(f"unknown key {key!r}")
            continue
        try:
            vals[key] = _convert(key, v)
        except ValueError as exc:
            errors.append(f"{key}: {exc}")
    exp = vals.get("experiment")
    if exp is None:
        errors.append("experiment is required")
    elif exp not in EXPERIMENTS:
        errors.append(f"unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")
    L = vals.get("L", 14)
    if not 4 <= L <= 24:
        errors.append(f"L must lie in [4, 24], got {L}")
    if not 0 <= vals.get("shift", 0.0) < 1:
        errors.append("shift must lie in [0, 1)")
    if vals.get("format", "csv") not in ("csv", "json"):
        errors.append("format must be csv or json")
    if "J" in vals and not 0 <= vals["J"] <= L:
        errors.append(f"J must lie in [0, L], got {vals['J']}")
    if "trials" in vals and vals["trials"] < 1:
        errors.append("trials must be >= 1")
    if any(x <= 0 for x in vals.get("lambda", ())):
        errors.append("lambda values must be positive")
    if any(not 0 < x < 0.25 for x in vals.get("delta", ())):
        errors.append("delta values must lie in (0, 1/4)")
    expo = {k: vals[k] for k in EXPONENT_KEYS if k in vals}
    if expo and exp in FIXED_EXPONENTS:
        errors.append(f"experiment {exp} fixes its own exponents; remove {', '.join(sorted(expo))}")
    elif expo:
        errors.extend(_exponent_violations(expo))
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        experiment=exp, L=L, shift=vals.get("shift", 0.0), seed=vals.get("seed", 0),
        out=vals.get("out", "out"), format=vals.get("format", "csv"),
        lambdas=vals.get("lambda", ()), deltas=vals.get("delta", ()), J=vals.get("J"),
        trials=vals.get("trials"), plots=vals.get("plots", True), exponents=expo,
    )


def _exponent_violations(expo: dict) -> list[str]:
    kw = dict(expo)
    m = kw.get("m", len(kw.get("p", ())) or len(kw.get("r", ())) or 1)
    kw["m"] = m
    kw.setdefault("r", (1.0,) * m)
    for key in ("tau", "tau_prime"):
        if key in kw:
            kw[key] = frozenset(i - 1 for i in kw[key])
    out = []
    try:
        cfg = ExponentConfig(**kw)
    except ExponentError as exc:
        return exc.violations
    except TypeError as exc:
        return [str(exc)]
    if cfg.p is not None:
        for i, (r, p) in enumerate(zip(cfg.r, cfg.p)):
            if not cfg._lt(r, p):
                out.append(f"(r, s) < (p, q) violated: r_{i + 1} = {r:g} must be < p_{i + 1} = {p:g}")
        if not cfg._le(cfg.q, cfg.s):
            out.append(f"(r, s) <= (p, q) violated: q = {cfg.q:g} must be <= s = {cfg.s:g}")
    return out
