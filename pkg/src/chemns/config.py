"""Scenario configuration: a flat, typed key-value text format.

One `key = value` pair per line, `#` comments, dotted section keys.  The
schema below is normative: unknown keys and ill-typed values are rejected
with the offending line number.  Parsing, serializing and re-parsing a
config yields an identical configuration.
"""

from __future__ import annotations

import hashlib
from importlib import resources

from .grid import Grid
from .model import ModelParams
from .diagnostics import EnergyConfig


class ConfigError(ValueError):
    pass


_REQUIRED = object()

# key -> (type tag, default); type tags: int, float, bool, str, ints, floats
SCHEMA = {
    "grid.lengths": ("floats", _REQUIRED),
    "grid.cells": ("ints", _REQUIRED),
    "params.chi1": ("float", 0.0),
    "params.chi2": ("float", 0.0),
    "params.a1": ("float", 0.0),
    "params.a2": ("float", 0.0),
    "params.mu1": ("float", 1.0),
    "params.mu2": ("float", 1.0),
    "params.alpha": ("float", 1.0),
    "params.beta": ("float", 1.0),
    "params.gamma": ("float", 1.0),
    "params.delta": ("float", 1.0),
    "params.kappa": ("int", 1),
    "params.eps": ("float", 0.0),
    "init.n1": ("str", _REQUIRED),
    "init.n2": ("str", _REQUIRED),
    "init.c": ("str", _REQUIRED),
    "init.u_x": ("str", "0"),
    "init.u_y": ("str", "0"),
    "init.u_z": ("str", "0"),
    "phi.expr": ("str", "0"),
    "energy.chi": ("float", 1.0),
    "energy.kbar": ("float", 1.0),
    "energy.b": ("float", 1.0),
    "flow.poisson_tol": ("float", 1e-12),
    "flow.helmholtz_tol": ("float", 1e-12),
    "flow.cfl_safety": ("float", 0.4),
    "transport.cfl_safety": ("float", 0.4),
    "transport.dt_max": ("float", 0.02),
    "transport.dt_min": ("float", 1e-9),
    "run.t_end": ("float", 1.0),
    "run.blowup_ceiling": ("float", 1e6),
    "run.seed": ("int", 0),
    "output.cadence": ("float", 0.5),
    "output.snapshots": ("bool", False),
    "output.dir": ("str", "out"),
    "diagnostics.q": ("float", 4.0),
}


def _parse_value(key, tag, raw, lineno):
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if tag == "str":
            return raw
        if tag == "ints":
            return tuple(int(p.strip()) for p in raw.split(","))
        if tag == "floats":
            return tuple(float(p.strip()) for p in raw.split(","))
    except ValueError:
        raise ConfigError(f"line {lineno}: bad {tag} value for {key!r}: {raw!r}")
    raise AssertionError(f"unknown schema tag {tag}")


def _format_value(tag, value):
    if tag == "bool":
        return "true" if value else "false"
    if tag in ("ints", "floats"):
        return ", ".join(repr(v) if tag == "floats" else str(v) for v in value)
    if tag == "float":
        return repr(value)
    return str(value)


class ScenarioConfig:
    """A validated, typed view over the flat key-value map."""

    def __init__(self, values: dict):
        unknown = set(values) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"unknown keys: {sorted(unknown)}")
        merged = {}
        for key, (tag, default) in SCHEMA.items():
            if key in values:
                merged[key] = values[key]
            elif default is _REQUIRED:
                raise ConfigError(f"missing required key {key!r}")
            else:
                merged[key] = default
        self.values = merged
        # eager validation of the structured views
        try:
            self.grid
            self.params
            self.energy
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def __eq__(self, other):
        return isinstance(other, ScenarioConfig) and self.values == other.values

    def __getitem__(self, key):
        return self.values[key]

    def with_overrides(self, overrides: dict) -> "ScenarioConfig":
        vals = dict(self.values)
        for key, raw in overrides.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown override key {key!r}")
            tag = SCHEMA[key][0]
            vals[key] = (_parse_value(key, tag, raw, 0)
                         if isinstance(raw, str) else raw)
        return ScenarioConfig(vals)

    @property
    def grid(self) -> Grid:
        return Grid(self.values["grid.lengths"], self.values["grid.cells"])

    @property
    def params(self) -> ModelParams:
        v = self.values
        return ModelParams(
            chi1=v["params.chi1"], chi2=v["params.chi2"],
            a1=v["params.a1"], a2=v["params.a2"],
            mu1=v["params.mu1"], mu2=v["params.mu2"],
            alpha=v["params.alpha"], beta=v["params.beta"],
            gamma=v["params.gamma"], delta=v["params.delta"],
            kappa=v["params.kappa"], eps=v["params.eps"])

    @property
    def energy(self) -> EnergyConfig:
        return EnergyConfig(chi=self.values["energy.chi"],
                            kbar=self.values["energy.kbar"],
                            B=self.values["energy.b"])

    def serialize(self) -> str:
        lines = []
        for key, (tag, _) in SCHEMA.items():
            lines.append(f"{key} = {_format_value(tag, self.values[key])}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()


def parse_config(text: str) -> ScenarioConfig:
    values = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw_line!r}")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, SCHEMA[key][0], raw, lineno)
    return ScenarioConfig(values)


def load_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


CANONICAL_SCENARIOS = ("coexistence_64", "exclusion_64", "uniform_32",
                       "smooth_32", "smoke_3d_16")


def canonical_config(name: str) -> ScenarioConfig:
    """Load one of the scenarios shipped with the package."""
    if name not in CANONICAL_SCENARIOS:
        raise ConfigError(f"unknown canonical scenario {name!r}; "
                          f"choose from {CANONICAL_SCENARIOS}")
    text = resources.files("chemns.scenarios").joinpath(f"{name}.cfg").read_text()
    return parse_config(text)
