"""Signal temporal logic over sampled signals.

Concrete syntax::

    phi  := pred | "!" phi | phi "&&" phi | phi "||" phi | "(" phi ")"
          | "G[" a "," b "](" phi ")" | "F[" a "," b "](" phi ")"
    pred := linexpr (">=" | "<=") number
    linexpr := [+|-] term {(+|-) term}      term := number "*" x<i> | x<i> | number

``&&`` binds tighter than ``||``; ``!`` binds tightest. State indices are
1-based. Interval endpoints are in seconds.

Robustness follows the usual min/max semantics. The continuous window
[t+a, t+b] is replaced by the grid samples from floor((t+a)/dt) to
ceil((t+b)/dt), i.e. the discrete window contains the continuous one.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .errors import HorizonExceeded, StateIndexError, ParseError
from .signals import Signal, steps_ceil, steps_floor


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Predicate:
    """Affine predicate. ``coeffs[i]`` multiplies x_{i+1}.

    h(x) = c.x - bound   for ``>=``
    h(x) = bound - c.x   for ``<=``
    """

    coeffs: tuple
    cmp: str
    bound: float

    def __post_init__(self):
        if self.cmp not in (">=", "<="):
            raise ValueError(f"bad comparator {self.cmp!r}")
        c = [float(v) for v in self.coeffs]
        while c and c[-1] == 0.0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))
        object.__setattr__(self, "bound", float(self.bound))

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    def h(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dim > x.shape[-1]:
            raise StateIndexError(f"predicate uses x{self.dim} but the signal has "
                                  f"{x.shape[-1]} states")
        v = x[..., : self.dim] @ np.asarray(self.coeffs) if self.dim else np.zeros(x.shape[:-1])
        return v - self.bound if self.cmp == ">=" else self.bound - v


@dataclass(frozen=True)
class Not:
    arg: "StlFormula"


@dataclass(frozen=True)
class And:
    args: tuple


@dataclass(frozen=True)
class Or:
    args: tuple


@dataclass(frozen=True)
class Always:
    a: float
    b: float
    arg: "StlFormula"

    def __post_init__(self):
        _check_interval(self.a, self.b)


@dataclass(frozen=True)
class Eventually:
    a: float
    b: float
    arg: "StlFormula"

    def __post_init__(self):
        _check_interval(self.a, self.b)


StlFormula = Union[Predicate, Not, And, Or, Always, Eventually]


def _check_interval(a, b):
    if not (0 <= a <= b) or not np.isfinite(b):
        raise ValueError(f"temporal interval needs 0 <= a <= b < inf, got [{a}, {b}]")


def conj(*args) -> StlFormula:
    return args[0] if len(args) == 1 else And(tuple(args))


def disj(*args) -> StlFormula:
    return args[0] if len(args) == 1 else Or(tuple(args))


def box(lo, hi, indices=None) -> StlFormula:
    """Conjunction lo_i <= x_i <= hi_i (predicates in the order lo1, hi1, lo2, ...)."""
    lo = list(lo)
    hi = list(hi)
    indices = list(range(len(lo))) if indices is None else list(indices)
    preds = []
    for i, l, h in zip(indices, lo, hi):
        c = [0.0] * (i + 1)
        c[i] = 1.0
        preds.append(Predicate(tuple(c), ">=", l))
        preds.append(Predicate(tuple(c), "<=", h))
    return conj(*preds)


def polytope(G, H) -> StlFormula:
    """Conjunction of the rows of G x <= H."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    return conj(*(Predicate(tuple(row), "<=", h) for row, h in zip(G, np.ravel(H))))


# --------------------------------------------------------------------------
# Structure


def children(phi: StlFormula) -> tuple:
    if isinstance(phi, Predicate):
        return ()
    if isinstance(phi, (And, Or)):
        return phi.args
    return (phi.arg,)


def horizon(phi: StlFormula) -> float:
    """Time span of future samples needed to evaluate ``phi`` at t."""
    if isinstance(phi, Predicate):
        return 0.0
    if isinstance(phi, (Always, Eventually)):
        return phi.b + horizon(phi.arg)
    return max(horizon(c) for c in children(phi))


def horizon_steps(phi: StlFormula, dt: float) -> int:
    if isinstance(phi, Predicate):
        return 0
    if isinstance(phi, (Always, Eventually)):
        return steps_ceil(phi.b, dt) + horizon_steps(phi.arg, dt)
    return max(horizon_steps(c, dt) for c in children(phi))


def state_dim(phi: StlFormula) -> int:
    """Largest state index referenced by any predicate."""
    if isinstance(phi, Predicate):
        return phi.dim
    return max(state_dim(c) for c in children(phi))


def predicates(phi: StlFormula) -> list:
    if isinstance(phi, Predicate):
        return [phi]
    return [p for c in children(phi) for p in predicates(c)]


def lipschitz(phi: StlFormula) -> float:
    """Lipschitz constant of the robustness w.r.t. the sup norm on signals.

    An affine predicate c.x - b is ||c||_1-Lipschitz under the inf-norm; not and
    the temporal operators keep the constant, and/or take the max.
    """
    if isinstance(phi, Predicate):
        return float(np.sum(np.abs(phi.coeffs)))
    return max(lipschitz(c) for c in children(phi))


# --------------------------------------------------------------------------
# Robustness


def _trace(phi: StlFormula, X: np.ndarray, dt: float, need: int) -> np.ndarray:
    """Robustness at sample indices 0..need-1 of X (shape (..., K, n))."""
    if isinstance(phi, Predicate):
        return phi.h(X[..., :need, :])
    if isinstance(phi, Not):
        return -_trace(phi.arg, X, dt, need)
    if isinstance(phi, And):
        return np.minimum.reduce([_trace(c, X, dt, need) for c in phi.args])
    if isinstance(phi, Or):
        return np.maximum.reduce([_trace(c, X, dt, need) for c in phi.args])
    ia = steps_floor(phi.a, dt)
    ib = steps_ceil(phi.b, dt)
    width = ib - ia + 1
    inner = _trace(phi.arg, X, dt, need + ib)[..., ia:]
    filt = minimum_filter1d if isinstance(phi, Always) else maximum_filter1d
    if width == 1:
        return inner[..., :need]
    return filt(inner, width, axis=-1, origin=-(width // 2))[..., :need]


def robustness_batch(phi: StlFormula, X, dt: float, k: int = 0) -> np.ndarray:
    """Robustness at sample k of a stack of signals X with shape (..., K, n)."""
    X = np.asarray(X, dtype=float)
    K = X.shape[-2]
    need = k + horizon_steps(phi, dt) + 1
    if need > K:
        raise HorizonExceeded(f"formula needs {need} samples from index 0, signal has {K}")
    return _trace(phi, X[..., k:, :], dt, 1)[..., 0]


def robustness_trace(phi: StlFormula, sig: Signal) -> np.ndarray:
    """Robustness at every sample where the formula can be evaluated."""
    need = len(sig) - horizon_steps(phi, sig.dt)
    if need < 1:
        raise HorizonExceeded("signal shorter than the formula horizon")
    return _trace(phi, sig.values, sig.dt, need)


def robustness(phi: StlFormula, sig: Signal, t: float = 0.0) -> float:
    k = sig.index_of(t)
    return float(robustness_batch(phi, sig.values, sig.dt, k))


# --------------------------------------------------------------------------
# Text form

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<var>x(?P<idx>\d+))
  | (?P<op>&&|\|\||>=|<=|[!()\[\],*+\-GF])
""", re.VERBOSE)


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        if m.lastgroup != "ws":
            kind = "op" if m.group("op") else ("var" if m.group("var") else "num")
            out.append((kind, m.group(0), pos))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text, dim):
        self.text = text
        self.dim = dim
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None, kind=None):
        tok = self.toks[self.i]
        if (value is not None and tok[1] != value) or (kind is not None and tok[0] != kind):
            want = value if value is not None else kind
            got = tok[1] or "end of input"
            raise ParseError(f"expected {want!r}, got {got!r}", self.text, tok[2])
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        return ParseError(msg, self.text, tok[2])

    def parse(self):
        phi = self.or_expr()
        if self.peek()[0] != "end":
            raise self.error(f"trailing input {self.peek()[1]!r}")
        return phi

    def or_expr(self):
        args = [self.and_expr()]
        while self.peek()[1] == "||":
            self.take()
            args.append(self.and_expr())
        return disj(*args)

    def and_expr(self):
        args = [self.unary()]
        while self.peek()[1] == "&&":
            self.take()
            args.append(self.unary())
        return conj(*args)

    def unary(self):
        tok = self.peek()
        if tok[1] == "!":
            self.take()
            return Not(self.unary())
        if tok[1] in ("G", "F"):
            return self.temporal()
        if tok[1] == "(":
            self.take()
            phi = self.or_expr()
            self.take(")")
            return phi
        return self.predicate()

    def number(self):
        sign = 1.0
        if self.peek()[1] in ("+", "-"):
            sign = -1.0 if self.take()[1] == "-" else 1.0
        return sign * float(self.take(kind="num")[1])

    def temporal(self):
        op = self.take()
        self.take("[")
        at = self.peek()
        a = self.number()
        self.take(",")
        b = self.number()
        self.take("]")
        if not 0 <= a <= b:
            raise self.error(f"interval [{a:g},{b:g}] needs 0 <= a <= b", at)
        self.take("(")
        phi = self.or_expr()
        self.take(")")
        return (Always if op[1] == "G" else Eventually)(a, b, phi)

    def predicate(self):
        coeffs = {}
        const = 0.0
        first = True
        start = self.peek()
        while True:
            tok = self.peek()
            sign = 1.0
            if tok[1] in ("+", "-"):
                self.take()
                sign = -1.0 if tok[1] == "-" else 1.0
            elif not first:
                break
            first = False
            tok = self.peek()
            if tok[0] == "var":
                self.take()
                self._add(coeffs, tok, sign)
            elif tok[0] == "num":
                value = sign * float(self.take()[1])
                if self.peek()[1] == "*":
                    self.take()
                    var = self.take(kind="var")
                    self._add(coeffs, var, value)
                else:
                    const += value
            else:
                raise self.error(f"expected a predicate, got {tok[1] or 'end of input'!r}")
        cmp_tok = self.peek()
        if cmp_tok[1] not in (">=", "<="):
            raise self.error(f"expected '>=' or '<=', got {cmp_tok[1] or 'end of input'!r}")
        self.take()
        bound = self.number() - const
        if not coeffs:
            raise self.error("predicate has no state variable", start)
        dense = [0.0] * max(coeffs)
        for i, c in coeffs.items():
            dense[i - 1] = c
        return Predicate(tuple(dense), cmp_tok[1], bound)

    def _add(self, coeffs, tok, value):
        idx = int(tok[1][1:])
        if idx < 1:
            raise self.error("state indices start at x1", tok)
        if self.dim is not None and idx > self.dim:
            raise StateIndexError(f"x{idx} exceeds state dimension {self.dim} "
                                  f"(offset {tok[2]})")
        coeffs[idx] = coeffs.get(idx, 0.0) + value


def parse(text: str, dim: int | None = None) -> StlFormula:
    return _Parser(text, dim).parse()


def _fmt(v: float) -> str:
    v = float(v)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _pred_text(p: Predicate) -> str:
    terms = [(i, c) for i, c in enumerate(p.coeffs) if c != 0.0]
    if not terms:
        lin = "0*x1"
    else:
        parts = []
        for j, (i, c) in enumerate(terms):
            if j == 0:
                parts.append(f"{_fmt(c)}*x{i + 1}")
            else:
                op = "-" if c < 0 else "+"
                parts.append(f"{op} {_fmt(abs(c))}*x{i + 1}")
        lin = " ".join(parts)
    return f"{lin} {p.cmp} {_fmt(p.bound)}"


def to_text(phi: StlFormula) -> str:
    if isinstance(phi, Predicate):
        return _pred_text(phi)
    if isinstance(phi, Not):
        return f"!({to_text(phi.arg)})"
    if isinstance(phi, And):
        return " && ".join(f"({to_text(c)})" if isinstance(c, (And, Or)) else to_text(c)
                           for c in phi.args)
    if isinstance(phi, Or):
        return " || ".join(f"({to_text(c)})" if isinstance(c, Or) else to_text(c)
                           for c in phi.args)
    op = "G" if isinstance(phi, Always) else "F"
    return f"{op}[{_fmt(phi.a)},{_fmt(phi.b)}]({to_text(phi.arg)})"


# --------------------------------------------------------------------------
# JSON AST form


def to_json(phi: StlFormula) -> dict:
    if isinstance(phi, Predicate):
        return {"kind": "predicate", "coeffs": list(phi.coeffs), "cmp": phi.cmp,
                "bound": phi.bound}
    if isinstance(phi, Not):
        return {"kind": "not", "arg": to_json(phi.arg)}
    if isinstance(phi, (And, Or)):
        return {"kind": "and" if isinstance(phi, And) else "or",
                "args": [to_json(c) for c in phi.args]}
    return {"kind": "always" if isinstance(phi, Always) else "eventually",
            "a": phi.a, "b": phi.b, "arg": to_json(phi.arg)}


def from_json(d: dict) -> StlFormula:
    kind = d.get("kind")
    if kind == "predicate":
        return Predicate(tuple(d["coeffs"]), d["cmp"], d["bound"])
    if kind == "not":
        return Not(from_json(d["arg"]))
    if kind in ("and", "or"):
        args = [from_json(c) for c in d["args"]]
        if len(args) < 2:
            raise ValueError(f"{kind} needs at least two arguments")
        return (And if kind == "and" else Or)(tuple(args))
    if kind in ("always", "eventually"):
        return (Always if kind == "always" else Eventually)(
            float(d["a"]), float(d["b"]), from_json(d["arg"]))
    raise ValueError(f"unknown node kind {kind!r}")
