"""Run configuration: TOML grammar, validation and default resolution.

A config is a TOML document with one table per concern. Every table is
validated against a schema before any computation; unknown keys, wrong
types and missing required values are collected and reported together,
one line per offending field. Tables whose keys depend on a discriminator
(``model.kind``, ``coefficients.kind``, sequence ``family``, weight
function ``kind``, ``space.kind``) are checked against the variant named
by that discriminator.

Resolution fills every default in, so the resolved config written into a
report fully determines the run.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

SUBCOMMANDS = ("weights", "fields", "wick", "converge", "spectral", "series")
REQUIRED = object()


class ConfigError(ValueError):
    """Validation failure; ``problems`` holds one message per field."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("\n".join(self.problems))


# ---------------------------------------------------------------------------
# schema primitives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Value:
    kind: str  # "float", "int", "bool", "str", "floats", "points", "any"
    default: Any = REQUIRED
    choices: tuple | None = None
    check: Callable[[Any], str | None] | None = None


@dataclass(frozen=True)
class Table:
    fields: Mapping[str, Any]
    default: Any = REQUIRED


@dataclass(frozen=True)
class Union:
    """Table whose allowed keys depend on the value of ``key``."""

    key: str
    variants: Mapping[str, Mapping[str, Any]]
    default_variant: str | None = None
    default: Any = REQUIRED


def _positive(v):
    return None if v > 0 else "must be > 0"


def _nonneg(v):
    return None if v >= 0 else "must be >= 0"


def _coerce(spec: Value, v, path: str, errs: list[str]):
    k = spec.kind
    if k == "float":
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            errs.append(f"{path}: expected a number, got {type(v).__name__}")
            return None
        v = float(v)
        if not math.isfinite(v):
            errs.append(f"{path}: must be finite")
            return None
    elif k == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            errs.append(f"{path}: expected an integer, got {type(v).__name__}")
            return None
    elif k == "bool":
        if not isinstance(v, bool):
            errs.append(f"{path}: expected true or false")
            return None
    elif k == "str":
        if not isinstance(v, str):
            errs.append(f"{path}: expected a string")
            return None
    elif k == "floats":
        if not isinstance(v, list) or not v or any(
                isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
            errs.append(f"{path}: expected a non-empty list of numbers")
            return None
        v = [float(x) for x in v]
    elif k == "points":
        ok = isinstance(v, list) and v and all(
            isinstance(row, list) and row and all(
                not isinstance(x, bool) and isinstance(x, (int, float)) for x in row) for row in v)
        if not ok:
            errs.append(f"{path}: expected a list of number lists")
            return None
        v = [[float(x) for x in row] for row in v]
    if spec.choices is not None and v not in spec.choices:
        errs.append(f"{path}: must be one of {', '.join(map(str, spec.choices))}; got {v!r}")
        return None
    if spec.check is not None:
        msg = spec.check(v)
        if msg:
            errs.append(f"{path}: {msg}")
            return None
    return v


def _resolve(schema, value, path: str, errs: list[str]):
    if isinstance(schema, Value):
        return _coerce(schema, value, path, errs)
    if not isinstance(value, dict):
        errs.append(f"{path}: expected a table")
        return None
    if isinstance(schema, Union):
        tag = value.get(schema.key, schema.default_variant)
        if tag is None:
            errs.append(f"{path}.{schema.key}: required "
                        f"(one of {', '.join(schema.variants)})")
            return None
        if tag not in schema.variants:
            errs.append(f"{path}.{schema.key}: must be one of "
                        f"{', '.join(schema.variants)}; got {tag!r}")
            return None
        fields_ = dict(schema.variants[tag])
        out = {schema.key: tag}
        rest = {k: v for k, v in value.items() if k != schema.key}
        out.update(_resolve_fields(fields_, rest, path, errs))
        return out
    return _resolve_fields(schema.fields, value, path, errs)


def _resolve_fields(fields_: Mapping[str, Any], value: Mapping, path: str, errs: list[str]):
    out = {}
    for key in value:
        if key not in fields_:
            allowed = ", ".join(fields_) or "(none)"
            errs.append(f"{_join(path, key)}: unknown key (allowed: {allowed})")
    for key, spec in fields_.items():
        p = _join(path, key)
        if key in value:
            v = _resolve(spec, value[key], p, errs)
            if v is not None:
                out[key] = v
        elif spec.default is REQUIRED:
            errs.append(f"{p}: required")
        elif spec.default is not None:
            out[key] = _resolve(spec, copy.deepcopy(spec.default), p, errs) \
                if isinstance(spec, (Table, Union)) else copy.deepcopy(spec.default)
    return out


def _join(path, key):
    return f"{path}.{key}" if path else key


# ---------------------------------------------------------------------------
# the grammar
# ---------------------------------------------------------------------------

def _grid(lo, hi, num):
    return Table({"min": Value("float", lo, check=_positive),
                  "max": Value("float", hi, check=_positive),
                  "num": Value("int", num, check=lambda v: None if v >= 2 else "must be >= 2")},
                 default={})


MODEL = Union("kind", {
    "pv-pair": {"m1": Value("float", check=_positive), "m2": Value("float", check=_positive),
                "c_norm": Value("float", 1.0 / (2.0 * math.pi), check=_positive)},
    "positive": {"m": Value("float", check=_positive),
                 "c_norm": Value("float", 1.0 / (2.0 * math.pi), check=_positive)},
    "profile": {"ir": Value("str", "log", choices=("const", "log", "power")),
                "uv": Value("str", "log", choices=("const", "log", "power")),
                "gamma": Value("float", 1.0, check=_positive),
                "gamma_ir": Value("float", None, check=_positive),
                "gamma_uv": Value("float", None, check=_positive)},
})

COEFFICIENTS = Union("kind", {
    "exponential": {"g": Value("float", 1.0)},
    "monomial": {"N": Value("int", check=_nonneg)},
    "factorial-power": {"g": Value("float", 1.0), "p": Value("float", 1.0)},
    "constant": {},
    "table": {"values": Value("floats")},
})

SEQUENCE = Union("family", {
    "power": {"gamma": Value("float", 1.0, check=_positive),
              "k_max": Value("int", 4096, check=_positive)},
    "factorial-power": {"gamma": Value("float", 1.0, check=_positive),
                        "k_max": Value("int", 4096, check=_positive)},
    "table": {"values": Value("floats", None), "path": Value("str", None)},
})

WEIGHT_FUNCTION = Union("kind", {
    "power": {"sigma": Value("float", 2.0, check=_positive),
              "coef": Value("float", 1.0, check=_positive)},
    "exp": {"coef": Value("float", 1.0, check=_positive)},
    "table": {"s": Value("floats"), "values": Value("floats")},
})

SPACE = Union("kind", {
    "sequences": {"a": SEQUENCE, "b": SEQUENCE},
    "young": {"alpha": WEIGHT_FUNCTION, "beta": WEIGHT_FUNCTION,
              "h": Value("float", check=lambda v: None if v > 1 else "must be > 1"),
              "k_max": Value("int", 512, check=_positive)},
}, default_variant="sequences")

GAUSSIAN = Table({"nu": Value("float", 1.0, check=_positive),
                  "center_re": Value("floats", [0.0, 0.0]),
                  "center_im": Value("floats", [0.0, 0.0])}, default={})

SECTIONS: dict[str, dict[str, Any]] = {
    "weights": {
        "space": SPACE,
        "weights": Table({"r": Value("floats", [1e1, 1e2, 1e3, 1e4, 1e5, 1e6]),
                          "validate_k_max": Value("int", 512, check=_positive)}, default={}),
    },
    "fields": {
        "model": MODEL,
        "fields": Table({"n_random": Value("int", 10000, check=_positive),
                         "box": Value("float", 10.0, check=_positive),
                         "seed": Value("int", 0, check=_nonneg),
                         "r": _grid(1e-2, 1e2, 41),
                         "t": _grid(1e-6, 1e1, 41)}, default={}),
    },
    "wick": {
        "wick": Table({"mode": Value("str", "selftest", choices=("selftest",)),
                       "seed": Value("int", 0, check=_nonneg)}, default={}),
    },
    "converge": {
        "coefficients": COEFFICIENTS,
        "model": MODEL,
        "space": SPACE,
        "converge": Table({"L": Value("floats", [1.0, 10.0]),
                           "eps": Value("float", 1.0, check=_positive),
                           "recommend": Value("bool", False),
                           "gamma_range": Value("floats", [0.05, 20.0]),
                           "t_min": Value("float", 1e-12, check=_positive),
                           "t_max": Value("float", 1e3, check=_positive)}, default={}),
        "grids": Table({"r": _grid(1.0, 1e6, 61), "s": _grid(1.0, 1e6, 61),
                        "fit_r": _grid(1e-3, 1e6, 181), "fit_t": _grid(1e-14, 1e3, 171)},
                       default={}),
    },
    "spectral": {
        "spectral": Table({
            "points": Value("points", None),
            "points_csv": Value("str", None),
            "dim": Value("int", 2, check=_positive),
            "orientation": Value("str", "backward", choices=("forward", "backward")),
        }, default={}),
        "norm": Table({
            "function": Table({"n": Value("int", 1, check=_positive),
                               "c": Value("float", 1.0, check=_nonneg),
                               "center": Value("floats", None),
                               "zero": Value("bool", False)}, default={}),
            "alpha": WEIGHT_FUNCTION, "beta": WEIGHT_FUNCTION,
            "h": Value("float", check=lambda v: None if v > 1 else "must be > 1"),
            "A": Value("float", 1.0, check=_positive),
            "B": Value("float", 1.0, check=_positive),
            "cone": Value("str", "none", choices=("none", "forward", "backward")),
            "p_max": Value("float", 6.0, check=_positive),
            "q_max": Value("float", 6.0, check=_positive),
            "n_p": Value("int", 121, check=_positive),
            "n_q": Value("int", 121, check=_positive),
        }, default=None),
    },
    "series": {
        "model": MODEL,
        "coefficients": COEFFICIENTS,
        "series": Table({"n": Value("int", 1, choices=(1, 2)),
                         "N_max": Value("int", 30, check=_nonneg),
                         "f": GAUSSIAN,
                         "regrouping_N": Value("int", 0, check=_nonneg)}, default={}),
    },
}


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Validated config for one subcommand, with all defaults filled in."""

    subcommand: str
    data: dict
    source: str | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    def __getitem__(self, key):
        return self.data[key]

    def get(self, key, default=None):
        return self.data.get(key, default)

    def canonical_json(self) -> str:
        return canonical_json(self.data)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def parse_toml(text: str, origin: str = "<config>") -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{origin}: TOML syntax error: {exc}"]) from None


def load_preset(name: str) -> dict:
    path = resources.files("wickconv") / "presets" / f"{name}.toml"
    if not path.is_file():
        raise ConfigError([f"--preset: unknown preset {name!r} (available: {', '.join(presets())})"])
    return parse_toml(path.read_text(), f"preset {name}")


def presets() -> list[str]:
    root = resources.files("wickconv") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def deep_merge(base: dict, over: Mapping) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_override(text: str) -> dict:
    """``section.key=value`` with a TOML value (bare words are strings)."""
    if "=" not in text:
        raise ConfigError([f"--set {text}: expected KEY=VALUE"])
    key, raw = text.split("=", 1)
    parts = [p.strip() for p in key.strip().split(".")]
    if not all(parts):
        raise ConfigError([f"--set {text}: bad key"])
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    out: dict = {}
    cur = out
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = value
    return out


def validate(subcommand: str, raw: Mapping, source: str | None = None,
             base_dir: Path | None = None) -> RunConfig:
    """Check ``raw`` against the grammar of ``subcommand`` and fill defaults."""
    if subcommand not in SECTIONS:
        raise ConfigError([f"unknown subcommand {subcommand!r}"])
    errs: list[str] = []
    schema = SECTIONS[subcommand]
    data = _resolve_fields(schema, dict(raw), "", errs)
    if not errs:
        errs.extend(_cross_checks(subcommand, data))
    if errs:
        raise ConfigError(errs)
    return RunConfig(subcommand, data, source, base_dir or Path.cwd())


def _cross_checks(sub: str, data: dict) -> list[str]:
    errs = []
    model = data.get("model")
    if model and model.get("kind") == "pv-pair" and model["m1"] > model["m2"]:
        errs.append("model.m2: must be >= model.m1")
    for name in ("weights", "converge"):
        if sub != name:
            continue
        space = data.get("space", {})
        for seq in ("a", "b"):
            s = space.get(seq)
            if s and s.get("family") == "table" and ("values" in s) == ("path" in s):
                errs.append(f"space.{seq}: table needs exactly one of 'values' or 'path'")
    if sub == "fields" and model and model.get("kind") == "profile":
        errs.append("model.kind: fields needs an evaluable model (pv-pair or positive)")
    if sub == "series":
        if model and model.get("kind") == "profile":
            errs.append("model.kind: series needs an evaluable model (pv-pair or positive)")
        s = data.get("series", {})
        cap = 60 if s.get("n", 1) == 1 else 12
        if s.get("N_max", 0) > cap:
            errs.append(f"series.N_max: must be <= {cap} for n = {s.get('n')}")
        if s.get("regrouping_N", 0) > 6:
            errs.append("series.regrouping_N: must be <= 6")
        f = s.get("f", {})
        for key in ("center_re", "center_im"):
            if key in f and len(f[key]) != 2:
                errs.append(f"series.f.{key}: needs 2 components")
    if sub == "converge":
        c = data.get("converge", {})
        g = c.get("gamma_range")
        if g and (len(g) != 2 or not 0 < g[0] < g[1]):
            errs.append("converge.gamma_range: needs two increasing positive numbers")
        if c and c.get("t_min", 1) >= c.get("t_max", 2):
            errs.append("converge.t_max: must exceed converge.t_min")
        if any(v <= 0 for v in c.get("L", [1.0])):
            errs.append("converge.L: entries must be > 0")
    for gname, grid in data.get("grids", {}).items():
        if grid["min"] >= grid["max"]:
            errs.append(f"grids.{gname}.max: must exceed grids.{gname}.min")
    for key in ("r", "t"):
        grid = data.get("fields", {}).get(key)
        if sub == "fields" and grid and grid["min"] >= grid["max"]:
            errs.append(f"fields.{key}.max: must exceed fields.{key}.min")
    if sub == "spectral":
        sp = data.get("spectral", {})
        if "points" in sp and "points_csv" in sp:
            errs.append("spectral: give either 'points' or 'points_csv', not both")
        if "points" not in sp and "points_csv" not in sp and "norm" not in data:
            errs.append("spectral: nothing to do (give points, points_csv or a [norm] table)")
        for i, row in enumerate(sp.get("points", [])):
            if len(row) != sp.get("dim", 2):
                errs.append(f"spectral.points[{i}]: needs {sp.get('dim', 2)} components")
        fn = data.get("norm", {}).get("function", {})
        if fn.get("center") is not None and len(fn["center"]) != fn.get("n", 1):
            errs.append("norm.function.center: length must equal norm.function.n")
        if data.get("norm", {}).get("cone", "none") != "none" and fn.get("n", 1) != sp.get("dim", 2):
            errs.append("norm.cone: the cone dimension (spectral.dim) must equal norm.function.n")
    return errs


def load(subcommand: str, config_path: str | None = None, preset: str | None = None,
         overrides: list[str] = ()) -> RunConfig:
    """Preset, then config file, then ``--set`` overrides; validated together."""
    raw: dict = {}
    base = Path.cwd()
    source = None
    if preset:
        raw = deep_merge(raw, load_preset(preset))
        source = f"preset:{preset}"
    if config_path:
        path = Path(config_path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError([f"--config: cannot read {config_path}: {exc.strerror}"]) from None
        raw = deep_merge(raw, parse_toml(text, str(path)))
        base = path.resolve().parent
        source = str(path) if source is None else f"{source}+{path}"
    for ov in overrides:
        raw = deep_merge(raw, parse_override(ov))
    return validate(subcommand, raw, source, base)
