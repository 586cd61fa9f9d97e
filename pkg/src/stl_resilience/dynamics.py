"""Dynamics expressions, RK4 integration under disturbances, Monte-Carlo validation."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import stl
from .errors import NonFinite, ParseError, UnknownVariable
from .parallel import parallel_map
from .signals import Signal, steps_ceil

# --------------------------------------------------------------------------
# Expression AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, Bin, Call]

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "tanh": np.tanh, "sqrt": np.sqrt,
             "log": np.log}

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_]\w*)
  | (?P<op>\*\*|[-+*/^()])
""", re.VERBOSE)


class _ExprParser:
    def __init__(self, text, n):
        self.text = text
        self.n = n
        self.toks = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
            if m.lastgroup != "ws":
                self.toks.append((m.lastgroup, m.group(0), pos))
            pos = m.end()
        self.toks.append(("end", "", len(text)))
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None):
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            raise ParseError(f"expected {value!r}, got {tok[1] or 'end of input'!r}",
                             self.text, tok[2])
        self.i += 1
        return tok

    def parse(self):
        e = self.expr()
        if self.peek()[0] != "end":
            tok = self.peek()
            raise ParseError(f"trailing input {tok[1]!r}", self.text, tok[2])
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            e = Bin(op, e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            e = Bin(op, e, self.unary())
        return e

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return Bin("^", base, self.unary())
        return base

    def atom(self):
        kind, value, pos = self.peek()
        if kind == "num":
            self.take()
            return Num(float(value))
        if kind == "name":
            self.take()
            m = re.fullmatch(r"x(\d+)", value)
            if m:
                idx = int(m.group(1))
                if idx < 1 or idx > self.n:
                    raise UnknownVariable(f"{value} at offset {pos} (state dimension {self.n})")
                return Var(idx)
            if value in FUNCTIONS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return Call(value, arg)
            raise UnknownVariable(f"{value!r} at offset {pos}")
        if value == "(":
            self.take()
            e = self.expr()
            self.take(")")
            return e
        raise ParseError(f"unexpected {value or 'end of input'!r}", self.text, pos)


def _eval(e: Expr, X):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return X[..., e.index - 1]
    if isinstance(e, Neg):
        return -_eval(e.arg, X)
    if isinstance(e, Call):
        return FUNCTIONS[e.name](_eval(e.arg, X))
    a = _eval(e.left, X)
    b = _eval(e.right, X)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        return a / b
    return a ** b


def expr_text(e: Expr) -> str:
    if isinstance(e, Num):
        v = e.value
        return str(int(v)) if v.is_integer() and abs(v) < 1e15 else repr(v)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Neg):
        return f"(-({expr_text(e.arg)}))"
    if isinstance(e, Call):
        return f"{e.name}({expr_text(e.arg)})"
    return f"({expr_text(e.left)} {e.op} {expr_text(e.right)})"


_ZERO = Num(0.0)
_ONE = Num(1.0)


def _add(a, b):
    if a == _ZERO:
        return b
    if b == _ZERO:
        return a
    return Bin("+", a, b)


def _sub(a, b):
    if b == _ZERO:
        return a
    if a == _ZERO:
        return Neg(b)
    return Bin("-", a, b)


def _mul(a, b):
    if a == _ZERO or b == _ZERO:
        return _ZERO
    if a == _ONE:
        return b
    if b == _ONE:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Bin("*", a, b)


def _div(a, b):
    if a == _ZERO:
        return _ZERO
    return a if b == _ONE else Bin("/", a, b)


def derivative(e: Expr, index: int) -> Expr:
    """Symbolic partial derivative with respect to x<index>."""
    if isinstance(e, Num):
        return _ZERO
    if isinstance(e, Var):
        return _ONE if e.index == index else _ZERO
    if isinstance(e, Neg):
        d = derivative(e.arg, index)
        return _ZERO if d == _ZERO else Neg(d)
    if isinstance(e, Call):
        d = derivative(e.arg, index)
        if d == _ZERO:
            return _ZERO
        outer = {
            "sin": lambda a: Call("cos", a),
            "cos": lambda a: Neg(Call("sin", a)),
            "exp": lambda a: Call("exp", a),
            "tanh": lambda a: _sub(_ONE, Bin("^", Call("tanh", a), Num(2.0))),
            "sqrt": lambda a: _div(Num(0.5), Call("sqrt", a)),
            "log": lambda a: _div(_ONE, a),
        }[e.name](e.arg)
        return _mul(outer, d)
    da = derivative(e.left, index)
    db = derivative(e.right, index)
    if e.op == "+":
        return _add(da, db)
    if e.op == "-":
        return _sub(da, db)
    if e.op == "*":
        return _add(_mul(da, e.right), _mul(e.left, db))
    if e.op == "/":
        return _div(_sub(_mul(da, e.right), _mul(e.left, db)), Bin("^", e.right, Num(2.0)))
    # power
    if db == _ZERO and isinstance(e.right, Num):
        p = e.right.value
        if p == 0:
            return _ZERO
        inner = _ONE if p == 1 else (e.left if p == 2 else Bin("^", e.left, Num(p - 1)))
        return _mul(_mul(Num(p), inner), da)
    # a^b with non-constant exponent: a^b (b' ln a + b a'/a)
    log_a = Call("log", e.left)
    return _mul(e, _add(_mul(db, log_a), _div(_mul(e.right, da), e.left)))


@dataclass(frozen=True)
class DynamicsExpr:
    """Vector field f: R^n -> R^n, one expression per coordinate."""

    exprs: tuple
    n: int

    def __post_init__(self):
        if len(self.exprs) != self.n:
            raise ValueError(f"{len(self.exprs)} expressions for a {self.n}-state system")

    @property
    def texts(self) -> list:
        return [expr_text(e) for e in self.exprs]

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        shape = X.shape[:-1]
        return np.stack([np.broadcast_to(_eval(e, X), shape) for e in self.exprs], axis=-1)

    def jacobian(self, x, rel_step=1e-5) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        h = rel_step * np.maximum(1.0, np.abs(x))
        E = np.diag(h)
        fp = self(x[None, :] + E)
        fm = self(x[None, :] - E)
        return ((fp - fm) / (2 * h[:, None])).T

    def hessians(self, X) -> np.ndarray:
        """Exact Hessians of every component at points X (..., n), by
        differentiating the expression trees. Returns (..., n_out, n, n)."""
        X = np.asarray(X, dtype=float)
        n = self.n
        H = np.empty(X.shape[:-1] + (n, n, n))
        for k, e in enumerate(self.exprs):
            for i in range(n):
                di = derivative(e, i + 1)
                for j in range(i, n):
                    v = np.broadcast_to(_eval(derivative(di, j + 1), X), X.shape[:-1])
                    H[..., k, i, j] = v
                    H[..., k, j, i] = v
        return H

    def hessian_bound(self, region, points_per_axis=9) -> float:
        """max over a grid of the region of max_k ||H_k(x)||_2 (numerical estimate)."""
        region = np.asarray(region, dtype=float)
        axes = [np.linspace(lo, hi, points_per_axis) for lo, hi in region]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)
        H = self.hessians(pts)
        return float(np.max(np.linalg.norm(H, ord=2, axis=(-2, -1))))


def parse_dynamics(texts, n: int) -> DynamicsExpr:
    if isinstance(texts, str):
        texts = [texts]
    return DynamicsExpr(tuple(_ExprParser(t, n).parse() for t in texts), n)


# --------------------------------------------------------------------------
# Systems


@dataclass(frozen=True)
class LinearSystem:
    """dx/dt = A (x - x_e) + B w."""

    A: np.ndarray
    input_map: np.ndarray = None
    equilibrium: np.ndarray = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        object.__setattr__(self, "A", A)
        n = A.shape[0]
        B = np.eye(n) if self.input_map is None else np.atleast_2d(
            np.asarray(self.input_map, dtype=float))
        if B.shape[0] != n:
            raise ValueError("input map row count must equal the state dimension")
        object.__setattr__(self, "input_map", B)
        xe = np.zeros(n) if self.equilibrium is None else np.asarray(self.equilibrium, dtype=float)
        object.__setattr__(self, "equilibrium", xe)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def rhs(self, X) -> np.ndarray:
        return (X - self.equilibrium) @ self.A.T


@dataclass(frozen=True)
class NonlinearSystem:
    """dx/dt = f(x) + B w, analysed around the equilibrium x_e over a box region."""

    f: DynamicsExpr
    equilibrium: np.ndarray
    region: np.ndarray
    input_map: np.ndarray = None
    hessian_bound: float | None = None

    def __post_init__(self):
        n = self.f.n
        object.__setattr__(self, "equilibrium", np.asarray(self.equilibrium, dtype=float))
        object.__setattr__(self, "region", np.asarray(self.region, dtype=float).reshape(n, 2))
        B = np.eye(n) if self.input_map is None else np.atleast_2d(
            np.asarray(self.input_map, dtype=float))
        if B.shape[0] != n:
            raise ValueError("input map row count must equal the state dimension")
        object.__setattr__(self, "input_map", B)

    @property
    def n(self) -> int:
        return self.f.n

    def rhs(self, X) -> np.ndarray:
        return self.f(X)


def as_system(f, input_map=None):
    if isinstance(f, (LinearSystem, NonlinearSystem)):
        return f
    if isinstance(f, DynamicsExpr):
        n = f.n
        return NonlinearSystem(f, np.zeros(n), np.zeros((n, 2)), input_map=input_map)
    return LinearSystem(np.asarray(f, dtype=float), input_map=input_map)


# --------------------------------------------------------------------------
# Disturbances

DISTURBANCE_KINDS = ("piecewise_constant_random", "sinusoid", "bang_bang_corner", "zero")


@dataclass(frozen=True)
class DisturbanceSignal:
    """Bounded disturbance, |w_i(t)| <= eps, held constant over each integrator step.

    ``corner`` fixes a constant sign vector for ``bang_bang_corner``; without it
    the signs switch randomly every ``hold_dt``.
    """

    kind: str
    eps: float
    hold_dt: float
    seed: int = 0
    dim: int = 1
    corner: tuple | None = None

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")

    def sample(self, grid) -> np.ndarray:
        """Per-step values for the K-1 steps of ``grid``; shape (K-1, dim)."""
        grid = np.asarray(grid, dtype=float)
        steps = len(grid) - 1
        dt = float(grid[1] - grid[0]) if len(grid) > 1 else 1.0
        m = self.dim
        if self.kind == "zero" or self.eps == 0 or steps == 0:
            return np.zeros((steps, m))
        rng = np.random.default_rng(self.seed)
        hold = max(1, steps_ceil(self.hold_dt, dt))
        n_holds = -(-steps // hold)
        if self.kind == "piecewise_constant_random":
            vals = rng.uniform(-self.eps, self.eps, size=(n_holds, m))
            return np.repeat(vals, hold, axis=0)[:steps]
        if self.kind == "bang_bang_corner":
            if self.corner is not None:
                signs = np.sign(np.asarray(self.corner, dtype=float)).reshape(1, m)
                return np.broadcast_to(signs * self.eps, (steps, m)).copy()
            signs = rng.choice([-1.0, 1.0], size=(n_holds, m))
            return np.repeat(signs * self.eps, hold, axis=0)[:steps]
        freq = rng.uniform(0.05, 2.0, size=m)
        phase = rng.uniform(0, 2 * math.pi, size=m)
        t = grid[:-1, None]
        return self.eps * np.sin(2 * math.pi * freq * t + phase)


# --------------------------------------------------------------------------
# Integration


def _rk4(rhs, X0, W, dt, B, t0=0.0):
    """Fixed-step RK4 for a batch: X0 (S, n), W (S, K-1, m). Returns (S, K, n)."""
    S, steps = W.shape[0], W.shape[1]
    out = np.empty((S, steps + 1, X0.shape[-1]))
    x = X0.astype(float).copy()
    out[:, 0] = x
    U = W @ B.T  # (S, K-1, n)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            u = U[:, k]
            k1 = rhs(x) + u
            k2 = rhs(x + 0.5 * dt * k1) + u
            k3 = rhs(x + 0.5 * dt * k2) + u
            k4 = rhs(x + dt * k3) + u
            x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(x)):
                raise NonFinite(t0 + (k + 1) * dt)
            out[:, k + 1] = x
    return out


def integrate(f, x0, d: DisturbanceSignal, grid, input_map=None) -> Signal:
    """Integrate dx/dt = f(x) + B d(t) with RK4; d is held constant on each step.

    ``f`` is a DynamicsExpr, a system object, or a matrix A (linear, x_e = 0).
    """
    system = as_system(f, input_map)
    grid = np.asarray(grid, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (system.n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({system.n},)")
    dt = float(grid[1] - grid[0])
    W = d.sample(grid)
    if W.shape[1] != system.input_map.shape[1]:
        raise ValueError("disturbance dimension does not match the input map")
    X = _rk4(system.rhs, x0[None, :], W[None], dt, system.input_map, float(grid[0]))[0]
    return Signal(t0=float(grid[0]), dt=dt, values=X)


def integrate_batch(system, x0, W, grid) -> np.ndarray:
    """Integrate many disturbance realisations W (S, K-1, m) from the same x0."""
    grid = np.asarray(grid, dtype=float)
    dt = float(grid[1] - grid[0])
    X0 = np.broadcast_to(np.asarray(x0, dtype=float), (W.shape[0], system.n))
    return _rk4(system.rhs, X0, W, dt, system.input_map, float(grid[0]))


# --------------------------------------------------------------------------
# Monte-Carlo validation

VALIDATION_MIX = ("constant corners first, then cycling "
                  "piecewise_constant_random / piecewise_constant_random / "
                  "bang_bang_corner (random switching) / sinusoid")


@dataclass(frozen=True)
class ViolationReport:
    trials: int
    violations: int
    worst_robustness: float
    worst_seed: int
    worst_trial: int
    worst_kind: str
    eps: float
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"trials": self.trials, "violations": self.violations,
                "worst_robustness": self.worst_robustness, "worst_seed": self.worst_seed,
                "worst_trial": self.worst_trial, "worst_kind": self.worst_kind,
                "eps": self.eps, "metadata": dict(self.metadata)}


def trial_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def trial_disturbance(index: int, seed: int, eps: float, m: int, hold_dt: float):
    """Disturbance for trial ``index``: a pure function of (seed, index)."""
    s = trial_seed(seed, index)
    n_corners = 2 ** m if m <= 10 else 0
    if index < n_corners:
        corner = tuple(1.0 if (index >> j) & 1 else -1.0 for j in range(m))
        return DisturbanceSignal("bang_bang_corner", eps, hold_dt, s, m, corner)
    kind = ("piecewise_constant_random", "piecewise_constant_random",
            "bang_bang_corner", "sinusoid")[(index - n_corners) % 4]
    return DisturbanceSignal(kind, eps, hold_dt, s, m)


def monte_carlo_validate(system, phi, x0, grid, eps: float, trials: int = 1000,
                         seed: int = 0, hold_dt: float | None = None, chunk: int = 200,
                         keep_trajectories: bool = False):
    """Simulate ``trials`` disturbed trajectories and count violations of ``phi``.

    A trajectory violates when its robustness is <= 0. Returns the report, and
    the (trials, K, n) trajectory stack as a second value if requested.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if trials < 1:
        raise ValueError("trials must be positive")
    system = as_system(system)
    grid = np.asarray(grid, dtype=float)
    dt = float(grid[1] - grid[0])
    hold_dt = 10 * dt if hold_dt is None else hold_dt
    m = system.input_map.shape[1]

    def run(start):
        idx = range(start, min(start + chunk, trials))
        dists = [trial_disturbance(i, seed, eps, m, hold_dt) for i in idx]
        W = np.stack([d.sample(grid) for d in dists])
        X = integrate_batch(system, x0, W, grid)
        rho = stl.robustness_batch(phi, X, dt)
        return rho, dists, (X if keep_trajectories else None)

    results = parallel_map(run, range(0, trials, chunk))
    rho = np.concatenate([r[0] for r in results])
    dists = [d for r in results for d in r[1]]
    worst = int(np.argmin(rho))
    report = ViolationReport(
        trials=trials,
        violations=int(np.sum(rho <= 0)),
        worst_robustness=float(rho[worst]),
        worst_seed=dists[worst].seed,
        worst_trial=worst,
        worst_kind=dists[worst].kind,
        eps=float(eps),
        metadata={"seed": seed, "hold_dt": hold_dt, "dt": dt, "mix": VALIDATION_MIX},
    )
    if keep_trajectories:
        return report, np.concatenate([r[2] for r in results])
    return report
