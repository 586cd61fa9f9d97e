import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stl_resilience import stl
from stl_resilience.errors import HorizonExceeded, ParseError, StateIndexError
from stl_resilience.signals import Signal
from stl_resilience.stl import Always, And, Eventually, Not, Or, Predicate

DT = 0.5

# --------------------------------------------------------------------------
# independent oracles: plain loops over the grid, no filters


def window(t_idx, a, b, dt):
    lo = t_idx + math.floor(a / dt + 1e-9)
    hi = t_idx + math.ceil(b / dt - 1e-9)
    return range(lo, hi + 1)


def rho_ref(phi, X, k, dt):
    if isinstance(phi, Predicate):
        c = np.zeros(X.shape[1])
        c[:len(phi.coeffs)] = phi.coeffs
        v = float(c @ X[k])
        return v - phi.bound if phi.cmp == ">=" else phi.bound - v
    if isinstance(phi, Not):
        return -rho_ref(phi.arg, X, k, dt)
    if isinstance(phi, And):
        return min(rho_ref(c, X, k, dt) for c in phi.args)
    if isinstance(phi, Or):
        return max(rho_ref(c, X, k, dt) for c in phi.args)
    vals = [rho_ref(phi.arg, X, j, dt) for j in window(k, phi.a, phi.b, dt)]
    return min(vals) if isinstance(phi, Always) else max(vals)


def sat_ref(phi, X, k, dt):
    """Boolean semantics on the grid; a predicate holds iff h > 0."""
    if isinstance(phi, Predicate):
        c = np.zeros(X.shape[1])
        c[:len(phi.coeffs)] = phi.coeffs
        v = float(c @ X[k])
        return (v - phi.bound if phi.cmp == ">=" else phi.bound - v) > 0
    if isinstance(phi, Not):
        return not sat_ref(phi.arg, X, k, dt)
    if isinstance(phi, And):
        return all(sat_ref(c, X, k, dt) for c in phi.args)
    if isinstance(phi, Or):
        return any(sat_ref(c, X, k, dt) for c in phi.args)
    vals = (sat_ref(phi.arg, X, j, dt) for j in window(k, phi.a, phi.b, dt))
    return all(vals) if isinstance(phi, Always) else any(vals)


# --------------------------------------------------------------------------
# strategies

N_STATES = 2
small = st.integers(-3, 3).map(float)
predicates_st = st.builds(
    lambda c, cmp, b: Predicate(tuple(c), cmp, b),
    st.lists(small, min_size=1, max_size=N_STATES).filter(lambda c: any(c)),
    st.sampled_from([">=", "<="]),
    st.integers(-4, 4).map(lambda v: v / 2),
)
intervals = st.tuples(st.integers(0, 4), st.integers(0, 4)).map(
    lambda ab: (min(ab) * DT, max(ab) * DT))


def extend(children):
    return st.one_of(
        children.map(Not),
        st.lists(children, min_size=2, max_size=3).map(lambda cs: And(tuple(cs))),
        st.lists(children, min_size=2, max_size=3).map(lambda cs: Or(tuple(cs))),
        st.tuples(intervals, children).map(lambda x: Always(x[0][0], x[0][1], x[1])),
        st.tuples(intervals, children).map(lambda x: Eventually(x[0][0], x[0][1], x[1])),
    )


formulas = st.recursive(predicates_st, extend, max_leaves=6)


def depth(phi):
    cs = stl.children(phi)
    return 0 if not cs else 1 + max(depth(c) for c in cs)


def signal_for(phi, data):
    K = stl.horizon_steps(phi, DT) + 1 + data.draw(st.integers(0, 3))
    knots = data.draw(st.lists(st.lists(st.integers(-6, 6).map(lambda v: v / 2),
                                        min_size=N_STATES, max_size=N_STATES),
                               min_size=2, max_size=5))
    knots = np.array(knots, dtype=float)
    # piecewise-linear through the knots
    s = np.linspace(0, len(knots) - 1, K)
    X = np.stack([np.interp(s, np.arange(len(knots)), knots[:, i]) for i in range(N_STATES)], axis=1)
    return X


# --------------------------------------------------------------------------
# parsing


def test_parse_always_predicate():
    phi = stl.parse("G[0,20](1*x1 <= 0.5)")
    assert isinstance(phi, Always) and (phi.a, phi.b) == (0, 20)
    p = phi.arg
    assert p == Predicate((1.0,), "<=", 0.5)
    assert p.h(np.array([0.2])) == pytest.approx(0.3)


def test_parse_eventually():
    phi = stl.parse("F[15,20](1*x1 >= 0)")
    assert isinstance(phi, Eventually) and (phi.a, phi.b) == (15, 20)


def test_parse_reversed_interval():
    with pytest.raises(SyntaxError) as err:
        stl.parse("G[5,3](x1 >= 0)")
    assert isinstance(err.value, ParseError)
    assert err.value.offset >= 0


@pytest.mark.parametrize("text", [
    "G[0,1](x1 >= 0", "x1 >=", "x1 >= 0 &&", "G[0](x1>=0)", "x1 = 0", "y1 >= 0",
    "x1 >= 0 $", "", "F[0,1]x1 >= 0",
])
def test_parse_errors_carry_offset(text):
    with pytest.raises(ParseError) as err:
        stl.parse(text)
    assert 0 <= err.value.offset <= len(text)


def test_parse_state_index_bound():
    with pytest.raises(IndexError):
        stl.parse("x3 >= 0", dim=2)
    with pytest.raises(StateIndexError):
        stl.parse("G[0,1](x1 >= 0 && 2*x4 <= 1)", dim=3)
    stl.parse("x3 >= 0", dim=3)


def test_parse_precedence():
    phi = stl.parse("x1 >= 0 || x1 <= -1 && !x2 >= 0")
    assert isinstance(phi, Or)
    assert isinstance(phi.args[1], And)
    assert isinstance(phi.args[1].args[1], Not)


def test_parse_affine_forms():
    phi = stl.parse("-x1 + 2.5*x2 - 1 <= 0.2")
    assert phi == Predicate((-1.0, 2.5), "<=", 1.2)
    phi = stl.parse("  2 * x2>=  -1e-1 ")
    assert phi == Predicate((0.0, 2.0), ">=", -0.1)


@given(formulas)
def test_text_round_trip(phi):
    text = stl.to_text(phi)
    again = stl.parse(text)
    assert stl.to_text(again) == text
    X = np.linspace(-1, 1, 2 * (stl.horizon_steps(phi, DT) + 1)).reshape(-1, 2)
    assert stl.robustness_batch(again, X, DT) == stl.robustness_batch(phi, X, DT)


@given(formulas)
def test_json_round_trip(phi):
    assert stl.from_json(stl.to_json(phi)) == phi


def test_from_json_rejects_unknown():
    with pytest.raises(ValueError):
        stl.from_json({"kind": "until"})


# --------------------------------------------------------------------------
# robustness


def test_constant_predicate():
    sig = Signal(0.0, 0.1, np.full((5, 1), 2.0))
    assert stl.robustness(stl.parse("x1 >= 1"), sig) == 1.0


def test_always_over_ramp():
    t = np.arange(5) * 0.5
    sig = Signal(0.0, 0.5, (t - 1)[:, None])
    assert stl.robustness(stl.parse("G[0,2](x1 >= 0)"), sig) == -1.0


def test_eventually_and_offset_time():
    t = np.arange(9) * 0.5
    sig = Signal(0.0, 0.5, (t - 1)[:, None])
    phi = stl.parse("F[0,1](x1 >= 0)")
    assert stl.robustness(phi, sig) == 0.0
    assert stl.robustness(phi, sig, 1.0) == 1.0
    assert stl.robustness_trace(phi, sig).tolist() == [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]


def test_window_snaps_outward():
    # [0.25, 0.75] with dt = 0.5 covers samples 0..2
    sig = Signal(0.0, 0.5, np.array([[5.0], [1.0], [3.0], [-9.0]]))
    assert stl.robustness(stl.parse("G[0.25,0.75](x1 >= 0)"), sig) == 1.0
    assert stl.robustness(stl.parse("F[0.25,0.75](x1 >= 0)"), sig) == 5.0


def test_horizon_exceeded():
    sig = Signal(0.0, 0.5, np.zeros((4, 1)))
    with pytest.raises(HorizonExceeded):
        stl.robustness(stl.parse("G[0,2](x1 >= 0)"), sig)
    with pytest.raises(HorizonExceeded):
        stl.robustness(stl.parse("G[0,1](x1 >= 0)"), sig, 1.0)


def test_horizon_nesting():
    phi = stl.parse("F[0,7](G[0,5](x1 >= 0)) && G[0,12](x1 <= 1)")
    assert stl.horizon(phi) == 12
    assert stl.horizon(stl.parse("F[1,7](G[2,5](x1 >= 0))")) == 12
    assert stl.horizon_steps(phi, 0.01) == 1200


@given(formulas, st.data())
def test_robustness_matches_loop_oracle(phi, data):
    X = signal_for(phi, data)
    got = stl.robustness_batch(phi, X, DT)
    assert got == rho_ref(phi, X, 0, DT)


@given(formulas, st.data())
def test_negation_identity(phi, data):
    X = signal_for(phi, data)
    assert stl.robustness_batch(Not(phi), X, DT) == -stl.robustness_batch(phi, X, DT)


@given(formulas, formulas, st.data())
def test_de_morgan(p1, p2, data):
    phi = Not(And((p1, p2)))
    psi = Or((Not(p1), Not(p2)))
    X = signal_for(phi, data)
    assert stl.robustness_batch(phi, X, DT) == stl.robustness_batch(psi, X, DT)


@given(formulas.filter(lambda f: depth(f) <= 4), st.data())
def test_sign_soundness(phi, data):
    X = signal_for(phi, data)
    r = stl.robustness_batch(phi, X, DT)
    if r > 0:
        assert sat_ref(phi, X, 0, DT)
    elif r < 0:
        assert not sat_ref(phi, X, 0, DT)


def test_batch_matches_single(rng):
    phi = stl.parse("F[0,1](G[0,0.5](x1 >= 0.1)) || !(x2 <= 0)")
    X = rng.normal(size=(7, 12, 2))
    batch = stl.robustness_batch(phi, X, 0.25)
    single = [stl.robustness(phi, Signal(0.0, 0.25, x)) for x in X]
    assert batch.tolist() == single


# --------------------------------------------------------------------------
# Lipschitz constant


def test_lipschitz_examples():
    assert stl.lipschitz(stl.parse("1*x1 >= 0")) == 1
    assert stl.lipschitz(stl.parse("(2*x1 + 1*x2 <= 3) && (5*x1 >= 0)")) == 5
    inner = stl.parse("(2*x1 - 1*x2 <= 3) || !(x2 >= 0)")
    assert stl.lipschitz(Always(0, 10, inner)) == stl.lipschitz(inner) == 3


@given(formulas, st.data())
def test_lipschitz_bound_holds(phi, data):
    X = signal_for(phi, data)
    noise = np.array(data.draw(st.lists(st.floats(-2, 2), min_size=X.size, max_size=X.size)))
    Y = X + noise.reshape(X.shape)
    lhs = abs(stl.robustness_batch(phi, X, DT) - stl.robustness_batch(phi, Y, DT))
    assert lhs <= stl.lipschitz(phi) * np.max(np.abs(X - Y)) + 1e-12


def test_lipschitz_bound_random_pairs(rng):
    phi = stl.parse("F[0,2](G[0,1](x1 + x2 <= 1 && x1 >= -1)) && G[0,3](!(x2 >= 2))")
    L = stl.lipschitz(phi)
    K = stl.horizon_steps(phi, 0.1) + 1
    for _ in range(500):
        X = rng.normal(size=(K, 2))
        Y = X + rng.normal(scale=rng.uniform(0.01, 1), size=X.shape)
        lhs = abs(stl.robustness_batch(phi, X, 0.1) - stl.robustness_batch(phi, Y, 0.1))
        assert lhs <= L * np.max(np.abs(X - Y)) + 1e-12


# --------------------------------------------------------------------------
# builders


def test_box_and_polytope_builders():
    b = stl.box([0, -1], [1, 2])
    assert stl.to_text(b) == "1*x1 >= 0 && 1*x1 <= 1 && 1*x2 >= -1 && 1*x2 <= 2"
    G = [[-1, 0], [1, 0], [0, -1], [0, 1], [-1, 1], [1, -1]]
    H = [0, 0.5, 0, 0.5, 0.2, 0.2]
    p = stl.polytope(G, H)
    x = np.array([[0.25, 0.3]])
    expected = min(h - np.dot(g, x[0]) for g, h in zip(G, H))
    assert stl.robustness_batch(p, x, 1.0) == pytest.approx(expected)
    assert stl.lipschitz(p) == 2


def test_temporal_interval_validation():
    with pytest.raises(ValueError):
        Always(2, 1, Predicate((1.0,), ">=", 0))
    with pytest.raises(ValueError):
        Eventually(-1, 1, Predicate((1.0,), ">=", 0))
