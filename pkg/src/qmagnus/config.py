"""Study configuration files.

A config is a TOML document with the sections ``[grid]``, ``[potential]``,
``[study]``, ``[output]`` and ``[tolerances]``. Every key is typed and
unknown sections or keys are rejected, so a typo never silently falls back
to a default. Step sizes may be given as numbers or as ``"p/q"`` strings.

Example::

    [grid]
    n = 64
    a = 0.0
    b = 1.0

    [potential]
    kind = "cos_mode"
    k = 1
    amplitude = 1.0

    [study]
    kind = "order"
    T = 1.0
    dt_list = ["1/8", "1/16", "1/32", "1/64"]
    m_policy = "reference"
    M = 4096

    [output]
    path = "order.csv"
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .discretization import PotentialSpec
from .errors import ConfigError
from .linalg import POWER_ITERATION_SEED
from .magnus import DEFAULT_M_REF
from .study import STUDY_KINDS, MPolicy, StudyGrid, Tolerances

_INT = "int"
_FLOAT = "float"
_BOOL = "bool"
_STR = "str"
_INT_LIST = "int_list"
_INT_OR_LIST = "int_or_list"
_STEP = "step"
_STEP_LIST = "step_list"
_FLOAT_LIST = "float_list"

SCHEMA: dict[str, dict[str, str]] = {
    "grid": {"n": _INT_OR_LIST, "d": _INT, "a": _FLOAT, "b": _FLOAT},
    "potential": {
        "kind": _STR,
        "k": _INT_OR_LIST,
        "amplitude": _FLOAT,
        "constant": _FLOAT,
        "values": _FLOAT_LIST,
        "file": _STR,
    },
    "study": {
        "kind": _STR,
        "T": _FLOAT,
        "dt": _STEP,
        "dt_list": _STEP_LIST,
        "m_policy": _STR,
        "M": _INT,
        "m_list": _INT_LIST,
        "samples_per_axis": _INT,
        "refine": _BOOL,
        "bounds": _BOOL,
        "contrast": _BOOL,
        "seed": _INT,
        "workers": _INT,
    },
    "output": {"path": _STR, "format": _STR, "json_mirror": _BOOL, "wall_time": _BOOL},
    "tolerances": {
        "fit_floor": _FLOAT,
        "uniformity_ratio": _FLOAT,
        "contamination_fraction": _FLOAT,
        "bound_slack": _FLOAT,
        "unitarity": _FLOAT,
    },
}
REQUIRED = {"grid": ("n",), "potential": ("kind",), "study": ("kind",)}


@dataclass(frozen=True)
class RunConfig:
    study: StudyGrid
    output_path: Path | None = None
    output_format: str = "csv"
    json_mirror: bool = False
    workers: int = 1
    seed: int = 0


def _step(v, where: str) -> float:
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{where}: cannot parse step {v!r}") from exc
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    raise ConfigError(f"{where}: expected a number or 'p/q' string, got {type(v).__name__}")


def _coerce(v, kind: str, where: str):
    def fail():
        raise ConfigError(f"{where}: expected {kind.replace('_', ' ')}, got {v!r}")

    is_int = isinstance(v, int) and not isinstance(v, bool)
    if kind == _INT:
        return v if is_int else fail()
    if kind == _FLOAT:
        return float(v) if is_int or isinstance(v, float) else fail()
    if kind == _BOOL:
        return v if isinstance(v, bool) else fail()
    if kind == _STR:
        return v if isinstance(v, str) else fail()
    if kind == _STEP:
        return _step(v, where)
    if kind in (_INT_LIST, _INT_OR_LIST, _FLOAT_LIST, _STEP_LIST):
        if kind == _INT_OR_LIST and is_int:
            return (v,)
        if not isinstance(v, list) or not v:
            fail()
        if kind == _STEP_LIST:
            return tuple(_step(x, where) for x in v)
        if kind == _FLOAT_LIST:
            return tuple(_coerce(x, _FLOAT, where) for x in v)
        return tuple(_coerce(x, _INT, where) for x in v)
    raise AssertionError(kind)


def validate(doc: dict) -> dict[str, dict]:
    """Type-check ``doc`` against the schema; returns the coerced sections."""
    out: dict[str, dict] = {s: {} for s in SCHEMA}
    for section, body in doc.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section {section!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"{section!r} must be a table")
        for key, value in body.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}] ({section}.{key})")
            out[section][key] = _coerce(value, SCHEMA[section][key], f"{section}.{key}")
    for section, keys in REQUIRED.items():
        for key in keys:
            if key not in out[section]:
                raise ConfigError(f"missing required key {section}.{key}")
    return out


def _potential(p: dict, base: Path | None) -> PotentialSpec:
    kind = p["kind"]
    try:
        if kind == "zero":
            return PotentialSpec.zero()
        if kind == "constant":
            return PotentialSpec.const(p.get("constant", 0.0))
        if kind == "cos_mode":
            return PotentialSpec.cos_mode(p.get("k", (1,)), p.get("amplitude", 1.0))
        if kind == "exp_sin":
            return PotentialSpec.exp_sin(p.get("amplitude", 1.0))
        if kind == "tabulated":
            if "file" in p:
                path = Path(p["file"])
                if base is not None and not path.is_absolute():
                    path = base / path
                return PotentialSpec.from_csv(path)
            if "values" in p:
                return PotentialSpec.tabulated(p["values"])
            raise ConfigError("tabulated potential needs potential.values or potential.file")
    except (OSError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"potential: {exc}") from exc
    raise ConfigError(f"potential.kind: unknown kind {kind!r}")


def build_run_config(doc: dict, base: Path | None = None) -> RunConfig:
    sec = validate(doc)
    g, p, s, o, t = (sec[k] for k in ("grid", "potential", "study", "output", "tolerances"))
    kind = s["kind"]
    if kind not in STUDY_KINDS:
        raise ConfigError(f"study.kind: unknown study kind {kind!r}; expected one of {STUDY_KINDS}")
    if "dt" in s and "dt_list" in s:
        raise ConfigError("give either study.dt or study.dt_list, not both")
    dt_list = s.get("dt_list") or ((s["dt"],) if "dt" in s else None)
    if dt_list is None:
        raise ConfigError("missing required key study.dt_list")
    policy_kind = s.get("m_policy", "reference")
    try:
        if policy_kind == "paper_formula":
            policy = MPolicy.paper_formula()
        else:
            policy = MPolicy(policy_kind, s.get("M", DEFAULT_M_REF))
    except ValueError as exc:
        raise ConfigError(f"study.m_policy: {exc}") from exc
    fmt = o.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"output.format: expected 'csv' or 'json', got {fmt!r}")
    seed = s.get("seed", POWER_ITERATION_SEED)
    if seed < 0:
        raise ConfigError("study.seed must be an unsigned integer")
    extra = {k: s[k] for k in ("samples_per_axis", "refine", "bounds", "contrast", "m_list") if k in s}
    if "T" in s:
        extra["T"] = s["T"]
    try:
        grid = StudyGrid(
            potential=_potential(p, base),
            study_kind=kind,
            n_list=g["n"],
            dt_list=tuple(dt_list),
            d=g.get("d", 1),
            a=g.get("a", 0.0),
            b=g.get("b", 1.0),
            m_policy=policy,
            wall_time=o.get("wall_time", False),
            seed=seed,
            tolerances=Tolerances(**t),
            **extra,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    path = Path(o["path"]) if "path" in o else None
    return RunConfig(
        study=grid,
        output_path=path,
        output_format=fmt,
        json_mirror=o.get("json_mirror", False),
        workers=s.get("workers", 1),
        seed=seed,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return build_run_config(doc, base=path.parent)
