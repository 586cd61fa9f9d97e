"""Analysis configuration: JSON in, validated dataclass out, and back."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import stl
from .dynamics import LinearSystem, NonlinearSystem, _ExprParser, parse_dynamics
from .errors import ConfigError, ParseError, ResilienceError
from .resilience import METHODS, ScenarioConfig
from .signals import make_grid

SYSTEM_TYPES = ("linear", "nonlinear")


def _number(value, path, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if positive and value <= 0:
        raise ConfigError(path, "must be > 0")
    if nonneg and value < 0:
        raise ConfigError(path, "must be >= 0")
    return value


def _integer(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}")
    return value


def _vector(value, path, n=None):
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a non-empty list of numbers")
    out = [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]
    if n is not None and len(out) != n:
        raise ConfigError(path, f"expected length {n}, got {len(out)}")
    return out


def _matrix(value, path, rows=None, cols=None):
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a non-empty list of rows")
    out = [_vector(r, f"{path}[{i}]") for i, r in enumerate(value)]
    width = len(out[0])
    for i, r in enumerate(out):
        if len(r) != width:
            raise ConfigError(f"{path}[{i}]", f"ragged matrix: row has {len(r)} entries, expected {width}")
    if rows is not None and len(out) != rows:
        raise ConfigError(path, f"expected {rows} rows, got {len(out)}")
    if cols is not None and width != cols:
        raise ConfigError(path, f"expected {cols} columns, got {width}")
    return out


def _mapping(d, path, allowed):
    if not isinstance(d, dict):
        raise ConfigError(path or "$", "expected an object")
    extra = sorted(set(d) - set(allowed))
    if extra:
        where = f"{path}.{extra[0]}" if path else extra[0]
        raise ConfigError(where, "unknown field")
    return d


def _require(d, key, path):
    if key not in d:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required field")
    return d[key]


@dataclass(frozen=True)
class SystemSpec:
    kind: str
    A: list | None = None
    f: list | None = None
    equilibrium: list | None = None
    region: list | None = None
    hessian_bound: float | None = None

    @property
    def n(self) -> int:
        return len(self.A) if self.kind == "linear" else len(self.f)

    def to_dict(self) -> dict:
        out = {"type": self.kind}
        if self.kind == "linear":
            out["A"] = self.A
            if self.equilibrium is not None:
                out["equilibrium"] = self.equilibrium
        else:
            out["f"] = self.f
            out["equilibrium"] = self.equilibrium
            out["region"] = self.region
            if self.hessian_bound is not None:
                out["hessian_bound"] = self.hessian_bound
        return out

    @classmethod
    def from_dict(cls, d, path="system") -> "SystemSpec":
        d = _mapping(d, path, ("type", "A", "f", "equilibrium", "region", "hessian_bound"))
        kind = _require(d, "type", path)
        if kind not in SYSTEM_TYPES:
            raise ConfigError(f"{path}.type", f"must be one of {SYSTEM_TYPES}")
        if kind == "linear":
            for key in ("f", "region", "hessian_bound"):
                if key in d:
                    raise ConfigError(f"{path}.{key}", "only valid for nonlinear systems")
            A = _matrix(_require(d, "A", path), f"{path}.A")
            n = len(A)
            if len(A[0]) != n:
                raise ConfigError(f"{path}.A", f"must be square, got {n}x{len(A[0])}")
            eq = d.get("equilibrium")
            eq = None if eq is None else _vector(eq, f"{path}.equilibrium", n)
            return cls("linear", A=A, equilibrium=eq)

        if "A" in d:
            raise ConfigError(f"{path}.A", "only valid for linear systems")
        f = _require(d, "f", path)
        if not isinstance(f, list) or not f or not all(isinstance(e, str) for e in f):
            raise ConfigError(f"{path}.f", "expected a non-empty list of expression strings")
        n = len(f)
        for i, text in enumerate(f):
            try:
                _ExprParser(text, n).parse()
            except ResilienceError as exc:
                raise ConfigError(f"{path}.f[{i}]", str(exc)) from exc
        eq = _vector(_require(d, "equilibrium", path), f"{path}.equilibrium", n)
        region = _matrix(_require(d, "region", path), f"{path}.region", rows=n, cols=2)
        for i, (lo, hi) in enumerate(region):
            if lo > hi:
                raise ConfigError(f"{path}.region[{i}]", "lower bound exceeds upper bound")
        hb = d.get("hessian_bound")
        hb = None if hb is None else _number(hb, f"{path}.hessian_bound", nonneg=True)
        return cls("nonlinear", f=list(f), equilibrium=eq, region=region, hessian_bound=hb)

    def build(self, input_map=None):
        if self.kind == "linear":
            return LinearSystem(np.array(self.A), input_map, self.equilibrium)
        return NonlinearSystem(parse_dynamics(self.f, self.n), np.array(self.equilibrium),
                               np.array(self.region), input_map, self.hessian_bound)


@dataclass(frozen=True)
class AnalysisConfig:
    system: SystemSpec
    x0: list
    spec: str
    t_end: float
    dt: float
    input_map: list | None = None
    eps_hi: float = 1.0
    delta: float | None = None
    eps_tol: float = 1e-4
    max_samples: int = 200_000
    method: str = "jordan"
    trials: int = 1000
    seed: int = 0
    name: str = ""
    notes: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def m(self) -> int:
        return self.n if self.input_map is None else len(self.input_map[0])

    @property
    def formula(self):
        return stl.parse(self.spec, self.n)

    @property
    def grid(self) -> np.ndarray:
        return make_grid(self.t_end, self.dt)

    def build_system(self):
        return self.system.build(None if self.input_map is None else np.array(self.input_map))

    def scenario(self, method: str | None = None) -> ScenarioConfig:
        return ScenarioConfig(eps_hi=self.eps_hi, delta=self.delta, eps_tol=self.eps_tol,
                              max_samples=self.max_samples, method=method or self.method)

    def to_dict(self) -> dict:
        out = {}
        if self.name:
            out["name"] = self.name
        if self.notes:
            out["notes"] = list(self.notes)
        out["system"] = self.system.to_dict()
        out["x0"] = self.x0
        if self.input_map is not None:
            out["input_map"] = self.input_map
        out["spec"] = self.spec
        out["horizon"] = {"t_end": self.t_end, "dt": self.dt}
        scenario = {"eps_hi": self.eps_hi, "eps_tol": self.eps_tol,
                    "max_samples": self.max_samples, "method": self.method}
        if self.delta is not None:
            scenario["delta"] = self.delta
        out["scenario"] = scenario
        out["validate"] = {"trials": self.trials, "seed": self.seed}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d) -> "AnalysisConfig":
        d = _mapping(d, "", ("name", "notes", "system", "x0", "input_map", "spec",
                             "horizon", "scenario", "validate"))
        name = d.get("name", "")
        if not isinstance(name, str):
            raise ConfigError("name", "expected a string")
        notes = d.get("notes", [])
        if isinstance(notes, str):
            notes = [notes]
        if not isinstance(notes, list) or not all(isinstance(s, str) for s in notes):
            raise ConfigError("notes", "expected a list of strings")

        system = SystemSpec.from_dict(_require(d, "system", ""))
        n = system.n
        x0 = _vector(_require(d, "x0", ""), "x0", n)
        input_map = d.get("input_map")
        if input_map is not None:
            input_map = _matrix(input_map, "input_map", rows=n)
        if system.kind == "nonlinear" and input_map is not None and \
                not np.array_equal(np.array(input_map), np.eye(n)):
            raise ConfigError("input_map", "nonlinear analysis requires the identity input map")

        text = _require(d, "spec", "")
        if not isinstance(text, str):
            raise ConfigError("spec", "expected an STL formula string")
        try:
            phi = stl.parse(text, n)
        except (ParseError, IndexError) as exc:
            raise ConfigError("spec", str(exc)) from exc

        hz = _mapping(_require(d, "horizon", ""), "horizon", ("t_end", "dt"))
        dt = _number(_require(hz, "dt", "horizon"), "horizon.dt", positive=True)
        t_end = _number(_require(hz, "t_end", "horizon"), "horizon.t_end", positive=True)
        try:
            make_grid(t_end, dt)
        except ValueError as exc:
            raise ConfigError("horizon.t_end", str(exc)) from exc
        if stl.horizon(phi) > t_end + 1e-9 * max(1.0, t_end):
            raise ConfigError("horizon.t_end",
                              f"formula horizon {stl.horizon(phi):g} exceeds t_end {t_end:g}")

        sc = _mapping(d.get("scenario", {}), "scenario",
                      ("delta", "eps_hi", "eps_tol", "max_samples", "method"))
        eps_hi = _number(sc.get("eps_hi", 1.0), "scenario.eps_hi", positive=True)
        delta = sc.get("delta")
        delta = None if delta is None else _number(delta, "scenario.delta", positive=True)
        eps_tol = _number(sc.get("eps_tol", 1e-4), "scenario.eps_tol", positive=True)
        max_samples = _integer(sc.get("max_samples", 200_000), "scenario.max_samples", 1)
        method = sc.get("method", "jordan")
        if method not in METHODS:
            raise ConfigError("scenario.method", f"must be one of {METHODS}")

        va = _mapping(d.get("validate", {}), "validate", ("trials", "seed"))
        trials = _integer(va.get("trials", 1000), "validate.trials", 1)
        seed = _integer(va.get("seed", 0), "validate.seed", 0)

        return cls(system=system, x0=x0, spec=stl.to_text(phi), t_end=t_end, dt=dt,
                   input_map=input_map, eps_hi=eps_hi, delta=delta, eps_tol=eps_tol,
                   max_samples=max_samples, method=method, trials=trials, seed=seed,
                   name=name, notes=list(notes))

    @classmethod
    def from_json(cls, text: str) -> "AnalysisConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def load_config(path) -> AnalysisConfig:
    return AnalysisConfig.from_json(Path(path).read_text())
