import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zospa import (
    BlockPoint,
    Box,
    LpBall,
    Product,
    Simplex,
    aq_squared,
    block_prox_step,
    bregman_divergence,
    lp_norm,
    make_geometry,
    prox_step,
)
from zospa.exceptions import ConfigurationError, DomainError, InvalidInputError
from zospa.geometry import prox_function, prox_gradient

ENT = make_geometry("entropy", Simplex(3))
EUC = make_geometry("euclidean", Box.cube(2, 0, 1))


def simplex_points(n, min_value=1e-6):
    return st.lists(st.floats(min_value, 1.0), min_size=n, max_size=n).map(
        lambda v: np.asarray(v) / np.sum(v))


# -- lp_norm


@pytest.mark.parametrize("v,p,expected", [
    ((3, 4), 2, 5.0),
    ((1, -1, 1), 1, 3.0),
    ((1, -2, 0.5), math.inf, 2.0),
    ((0, 0), 1.5, 0.0),
])
def test_lp_norm_examples(v, p, expected):
    assert lp_norm(v, p) == pytest.approx(expected, abs=1e-12)


def test_lp_norm_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        lp_norm([1.0, np.nan], 2)
    with pytest.raises(InvalidInputError):
        lp_norm([1.0, 2.0], 0.5)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8), st.floats(1.0, 4.0))
def test_lp_norm_matches_numpy(v, p):
    assert lp_norm(v, p) == pytest.approx(np.linalg.norm(v, ord=p), rel=1e-9, abs=1e-12)


# -- a_q


def test_aq_squared_values():
    assert aq_squared(2, 50) == 1.0
    assert aq_squared(math.inf, 100) == pytest.approx((32 * math.log(100) - 8) / 100)
    # finite q picks the smaller of the two constants
    assert aq_squared(3, 100) == pytest.approx(5 * 100 ** (2 / 3 - 1))
    assert aq_squared(math.inf, 2) == 1.0


# -- geometry construction


def test_make_geometry_diameters():
    g = make_geometry("entropy", Product(Simplex(4), Simplex(9)))
    assert g.diameter_sq == pytest.approx(2 * math.log(4) + 2 * math.log(9))
    assert g.q == math.inf and g.n == 13
    e = make_geometry("euclidean", Product(Box.cube(2, -1, 1), LpBall(np.zeros(3), 2.0, 1.5)))
    assert e.diameter_sq == pytest.approx(8.0 + 16.0)
    assert e.a_q == 1.0


def test_entropy_needs_simplex():
    with pytest.raises(ConfigurationError):
        make_geometry("entropy", Box.cube(2, 0, 1))
    with pytest.raises(ConfigurationError):
        make_geometry("hyperbolic", Simplex(2))


# -- divergences


def test_bregman_examples():
    assert bregman_divergence(EUC, [0.3, 0.7], [0.3, 0.7]) == 0.0
    ent2 = make_geometry("entropy", Simplex(2))
    expected = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
    assert expected == pytest.approx(0.14384, abs=1e-5)
    assert bregman_divergence(ent2, [0.5, 0.5], [0.25, 0.75]) == pytest.approx(expected, abs=1e-12)
    assert bregman_divergence(EUC, [0, 0], [3, 4]) == pytest.approx(12.5)


def test_bregman_domain_errors():
    ent2 = make_geometry("entropy", Simplex(2))
    with pytest.raises(DomainError):
        bregman_divergence(ent2, [0.5, 0.5], [1.0, 0.0])
    with pytest.raises(InvalidInputError):
        bregman_divergence(ent2, [0.5, 0.5], [1.0, 0.0, 0.0])
    # vanishing point coordinates are fine (0 log 0 = 0)
    assert bregman_divergence(ent2, [1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))


def test_bregman_matches_definition():
    z = np.array([0.2, 0.3, 0.5])
    w = np.array([0.4, 0.4, 0.2])
    direct = prox_function(ENT, z) - prox_function(ENT, w) - prox_gradient(ENT, w) @ (z - w)
    assert bregman_divergence(ENT, z, w) == pytest.approx(direct, abs=1e-14)


@settings(max_examples=200)
@given(simplex_points(5), simplex_points(5))
def test_entropy_strong_convexity(z, w):
    g = make_geometry("entropy", Simplex(5))
    assert bregman_divergence(g, z, w) >= 0.5 * lp_norm(z - w, 1) ** 2 - 1e-10


@settings(max_examples=200)
@given(simplex_points(4), simplex_points(4), simplex_points(4))
def test_three_point_identity(a, b, c):
    # D(a,c) = D(a,b) + D(b,c) + <grad d(b) - grad d(c), a - b>
    g = make_geometry("entropy", Simplex(4))
    lhs = bregman_divergence(g, a, c)
    rhs = (bregman_divergence(g, a, b) + bregman_divergence(g, b, c)
           + (prox_gradient(g, b) - prox_gradient(g, c)) @ (a - b))
    assert lhs == pytest.approx(rhs, abs=1e-8)


# -- prox steps


def test_prox_step_examples():
    ent2 = make_geometry("entropy", Simplex(2))
    out = prox_step(ent2, Simplex(2), [0.5, 0.5], [math.log(2), 0.0])
    np.testing.assert_allclose(out, [1 / 3, 2 / 3], atol=1e-12)
    out = prox_step(EUC, Box.cube(2, 0, 1), [0.5, 0.5], [1.0, -1.0])
    np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-12)


def test_prox_step_rejects_bad_pairing():
    with pytest.raises(ConfigurationError):
        prox_step(ENT, Box.cube(3, 0, 1), [0.5] * 3, [0.0] * 3)
    with pytest.raises(InvalidInputError):
        prox_step(ENT, Simplex(3), [1 / 3] * 3, [0.0, 0.0])
    with pytest.raises(InvalidInputError):
        prox_step(ENT, Simplex(3), [1 / 3] * 3, [0.0, np.inf, 0.0])


def test_prox_step_zero_gradient_is_identity():
    z = np.array([0.1, 0.6, 0.3])
    np.testing.assert_allclose(prox_step(ENT, Simplex(3), z, np.zeros(3)), z, atol=1e-15)


def test_block_prox_step_examples():
    s = Product(Simplex(2), Simplex(2))
    g = make_geometry("entropy", s)
    z = BlockPoint([0.5, 0.5], [0.2, 0.8])
    out = block_prox_step(g, s, z, BlockPoint([math.log(2), 0.0], [0.0, 0.0]))
    np.testing.assert_allclose(out.x, [1 / 3, 2 / 3], atol=1e-12)
    np.testing.assert_allclose(out.y, [0.2, 0.8], atol=1e-12)

    balls = Product(LpBall(np.zeros(2), 1.0), LpBall(np.zeros(2), 1.0))
    e = make_geometry("euclidean", balls)
    out = block_prox_step(e, balls, BlockPoint([0.1, 0.2], [0.0, 0.0]), BlockPoint([0.05, -0.1], [0.1, 0.1]))
    np.testing.assert_allclose(out.flat(), [0.05, 0.3, -0.1, -0.1], atol=1e-12)
    with pytest.raises(InvalidInputError):
        block_prox_step(e, balls, BlockPoint([0.1], [0.0, 0.0, 0.0]), BlockPoint([0.0], [0.0, 0.0, 0.0]))


def _brute_force_prox(g, z, xi, floor=0.0, grid=400):
    """Minimise D(u, z) + <xi, u> over a grid of the 3-simplex."""
    t = np.linspace(0, 1, grid + 1)
    a, b = np.meshgrid(t, t)
    keep = a + b <= 1
    U = np.stack([a[keep], b[keep], np.maximum(1 - a[keep] - b[keep], 0.0)], axis=1)
    U = floor + (1 - 3 * floor) * U
    vals = [bregman_divergence(g, u, z, floor) + xi @ u for u in U]
    return U[int(np.argmin(vals))]


def test_entropy_prox_matches_grid_search():
    rng = np.random.default_rng(3)
    for floor in (0.0, 0.05):
        s = Simplex(3, floor)
        z = s.sample_points(rng, 1)[0]
        xi = rng.normal(size=3)
        out = prox_step(ENT, s, z, xi)
        ref = _brute_force_prox(ENT, z, xi, floor)
        np.testing.assert_allclose(out, ref, atol=5e-3)
        assert s.contains(out, 1e-12)


@settings(max_examples=100)
@given(simplex_points(4), simplex_points(4),
       st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_prox_optimality_inequality(z, u, xi):
    # <xi, z+ - u> <= D(u, z) - D(u, z+) - D(z+, z) for every u in the set
    g = make_geometry("entropy", Simplex(4))
    xi = np.asarray(xi)
    zp = prox_step(g, Simplex(4), z, xi)
    lhs = xi @ (zp - u)
    rhs = bregman_divergence(g, u, z) - bregman_divergence(g, u, zp) - bregman_divergence(g, zp, z)
    assert lhs <= rhs + 1e-8


@settings(max_examples=100)
@given(st.sampled_from(["simplex", "box", "l1", "l15", "l2"]),
       st.integers(0, 10_000))
def test_prox_output_is_feasible(kind, seed):
    rng = np.random.default_rng(seed)
    s = {
        "simplex": Simplex(5),
        "box": Box.cube(5, -1, 2),
        "l1": LpBall(np.ones(5), 1.0, 1.0),
        "l15": LpBall(np.zeros(5), 2.0, 1.5),
        "l2": LpBall(np.zeros(5), 0.5, 2.0),
    }[kind]
    g = make_geometry("entropy" if kind == "simplex" else "euclidean", s)
    z = s.sample_points(rng, 1)[0]
    xi = rng.normal(scale=10.0, size=5)
    out = prox_step(g, s, z, xi)
    assert s.contains(out, 1e-9)
