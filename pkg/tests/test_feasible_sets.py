import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from zospa import (
    Box,
    DirectionSampler,
    LpBall,
    Product,
    Simplex,
    contains,
    hyperplane_basis,
    resolve_shrink_plan,
)
from zospa.exceptions import ConfigurationError, InvalidInputError
from zospa.feasible_sets import _expand_hyperplane, dual_exponent


# -- membership


def test_contains_examples():
    assert contains(Simplex(3), [1 / 3] * 3)
    assert not contains(Box.cube(2, 0, 1), [1.001, 0.5], tol=1e-6)
    assert contains(LpBall(np.zeros(2), 1.0, 1.0), [0.5, 0.5])
    assert not contains(LpBall(np.zeros(2), 1.0, 1.0), [0.6, 0.5])
    assert contains(Product(Simplex(2), Box.cube(1, 0, 1)), [0.5, 0.5, 1.0])


def test_contains_rejects_bad_shape():
    with pytest.raises(InvalidInputError):
        contains(Simplex(3), [0.5, 0.5])
    with pytest.raises(InvalidInputError):
        contains(Simplex(2), [np.nan, 1.0])


def test_constructors_validate():
    with pytest.raises(InvalidInputError):
        Simplex(0)
    with pytest.raises(InvalidInputError):
        Box([0, 1], [1, 0])
    with pytest.raises(InvalidInputError):
        LpBall(np.zeros(2), 1.0, 3.0)
    with pytest.raises(InvalidInputError):
        LpBall(np.zeros(2), 0.0)


def test_dual_exponent():
    assert dual_exponent(1) == math.inf
    assert dual_exponent(2) == 2
    assert dual_exponent(1.5) == pytest.approx(3.0)


# -- shrinking


def test_shrink_examples():
    inner = Box.cube(2, 0, 1).shrink(0.1)
    np.testing.assert_allclose(inner.lower, [0.1, 0.1])
    np.testing.assert_allclose(inner.upper, [0.9, 0.9])
    assert LpBall(np.zeros(3), 1.0).shrink(0.25).radius == pytest.approx(0.75)
    with pytest.raises(ConfigurationError):
        Simplex(2).shrink(0.6)
    with pytest.raises(ConfigurationError):
        Simplex(2).shrink(-0.1)
    with pytest.raises(ConfigurationError):
        Box.cube(2, 0, 1).shrink(0.6)
    assert Simplex(4).shrink(0.05).floor == pytest.approx(0.05)


def test_map_to_shrunk_examples():
    out = Simplex(2).map_to_shrunk(0.1, [1.0, 0.0])
    np.testing.assert_allclose(out, [6 / 7, 1 / 7], atol=1e-12)
    assert np.linalg.norm(out - [1.0, 0.0]) == pytest.approx(math.sqrt(2) / 7)
    np.testing.assert_allclose(Box.cube(2, 0, 1).map_to_shrunk(0.1, [0.05, 0.5]), [0.1, 0.5])
    np.testing.assert_allclose(LpBall(np.zeros(2), 1.0).map_to_shrunk(0.2, [0.6, 0.8]), [0.48, 0.64])
    with pytest.raises(InvalidInputError):
        Simplex(2).map_to_shrunk(0.1, [0.7, 0.7])


def test_clearance_and_displacement_examples():
    assert LpBall(np.zeros(4), 1.0, 1.0).clearance(0.1) == pytest.approx(0.05)
    assert Box.cube(3, 0, 1).clearance(0.1) == pytest.approx(0.1)
    assert LpBall(np.zeros(4), 2.0, 2.0).clearance(0.1) == pytest.approx(0.2)
    assert Simplex(10).displacement_bound(0.01) == pytest.approx(0.2)
    assert Box.cube(4, 0, 1).displacement_bound(0.1) == pytest.approx(0.2)
    assert LpBall(np.zeros(4), 1.0, 1.0).displacement_bound(0.1) == pytest.approx(0.1)


def _lp_dist(a, b, p):
    return np.sum(np.abs(a - b) ** p, axis=-1) ** (1 / p)


@settings(max_examples=60)
@given(st.sampled_from(["simplex", "box", "l1", "l15", "l2"]),
       st.floats(0.001, 0.1), st.integers(0, 10_000))
def test_map_to_shrunk_invariants(kind, alpha, seed):
    """Image lies in the shrunk set and moves by at most the l2 displacement bound."""
    rng = np.random.default_rng(seed)
    n = 5
    s = {
        "simplex": Simplex(n),
        "box": Box.cube(n, -1, 1),
        "l1": LpBall(np.zeros(n), 2.0, 1.0),
        "l15": LpBall(np.ones(n), 1.0, 1.5),
        "l2": LpBall(np.zeros(n), 1.0, 2.0),
    }[kind]
    pts = s.sample_points(rng, 50)
    if kind == "simplex":
        pts = np.vstack([pts, np.eye(n)])
    inner = s.shrink(alpha)
    out = s.map_to_shrunk(alpha, pts)
    assert np.all(inner.contains(out, 1e-12))
    assert np.all(_lp_dist(out, pts, 2.0) <= s.displacement_bound(alpha) + 1e-12)


@settings(max_examples=60)
@given(st.sampled_from(["simplex", "box", "l1", "l15", "l2"]),
       st.floats(0.001, 0.09), st.integers(0, 10_000))
def test_clearance_keeps_perturbations_feasible(kind, alpha, seed):
    rng = np.random.default_rng(seed)
    n = 4
    s = {
        "simplex": Simplex(n),
        "box": Box.cube(n, 0, 1),
        "l1": LpBall(np.zeros(n), 1.0, 1.0),
        "l15": LpBall(np.zeros(n), 1.0, 1.5),
        "l2": LpBall(np.zeros(n), 1.0, 2.0),
    }[kind]
    inner = s.shrink(alpha)
    x = inner.sample_points(rng, 200)
    e = DirectionSampler(s, seed).sample_many(200)
    t = s.clearance(alpha) * rng.uniform(-1, 1, size=(200, 1))
    assert np.all(s.contains(x + t * e, 1e-12))


# -- projections and supports


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0])
def test_ball_projection_matches_optimizer(p):
    rng = np.random.default_rng(int(p * 10))
    ball = LpBall(np.array([0.5, -0.2, 0.1]), 0.7, p)
    for _ in range(5):
        v = rng.normal(scale=2.0, size=3)
        got = ball.project(v)
        res = minimize(lambda u: np.sum((u - v) ** 2), ball.center(),
                       constraints=[{"type": "ineq", "fun": lambda u: 0.7 - ball.norm(u - ball.center_point)}],
                       method="SLSQP", options={"ftol": 1e-14, "maxiter": 500})
        assert np.sum((got - v) ** 2) <= res.fun + 1e-6
        assert ball.contains(got, 1e-9)


def test_simplex_projection_and_support():
    s = Simplex(3)
    np.testing.assert_allclose(s.project([2.0, 0.0, 0.0]), [1.0, 0.0, 0.0])
    np.testing.assert_allclose(s.project([0.5, 0.5, 0.5]), [1 / 3] * 3)
    assert s.support([0.1, 0.7, -3.0]) == pytest.approx(0.7)
    assert Simplex(3, 0.1).support([1.0, 0.0, 0.0]) == pytest.approx(0.1 + 0.7)
    assert Box.cube(2, -1, 2).support([1.0, -1.0]) == pytest.approx(3.0)
    assert LpBall(np.zeros(2), 2.0, 1.0).support([1.0, -3.0]) == pytest.approx(6.0)


# -- shrink plans


def test_resolve_shrink_plan_examples():
    assert resolve_shrink_plan(Simplex(100), 0.4, 1.0).alpha == pytest.approx(1e-3)
    assert resolve_shrink_plan(Box.cube(16, 0, 1), 0.8, 1.0).alpha == pytest.approx(0.1)
    plan = resolve_shrink_plan(Product(Simplex(100), Simplex(100)), 0.4, 1.0)
    assert plan.alpha == pytest.approx(5e-4)
    assert plan.tau_max == pytest.approx(5e-4)
    with pytest.raises(ConfigurationError):
        resolve_shrink_plan(Simplex(3), 0.0, 1.0)


# -- directions


def test_hyperplane_basis_is_orthonormal():
    V = hyperplane_basis(6)
    np.testing.assert_allclose(V @ V.T, np.eye(5), atol=1e-12)
    np.testing.assert_allclose(V.sum(axis=1), 0.0, atol=1e-12)
    coef = np.random.default_rng(0).normal(size=(4, 5))
    np.testing.assert_allclose(_expand_hyperplane(coef), coef @ V, atol=1e-12)


def test_two_simplex_directions():
    E = DirectionSampler(Simplex(2), 0).sample_many(100)
    r = 1 / math.sqrt(2)
    assert np.all(np.isclose(np.abs(E), r))
    np.testing.assert_allclose(E[:, 0], -E[:, 1])


def test_hyperplane_directions_moments():
    n = 5
    E = DirectionSampler(Simplex(n), 1).sample_many(100_000)
    assert np.max(np.abs(E.sum(axis=1))) < 1e-12
    np.testing.assert_allclose(np.linalg.norm(E, axis=1), 1.0, atol=1e-12)
    P = np.eye(n) - np.ones((n, n)) / n
    np.testing.assert_allclose(E.T @ E / E.shape[0], P / (n - 1), atol=5e-3)


def test_full_sphere_and_product_directions():
    E = DirectionSampler(Box.cube(3, 0, 1), 2).sample_many(50_000)
    np.testing.assert_allclose(np.linalg.norm(E, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(E.T @ E / E.shape[0], np.eye(3) / 3, atol=5e-3)

    s = Product(Simplex(3), Box.cube(2, 0, 1))
    sampler = DirectionSampler(s, 3)
    assert sampler.mode == "product_concat"
    E = sampler.sample_many(1000)
    np.testing.assert_allclose(np.linalg.norm(E, axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(E[:, :3].sum(axis=1), 0.0, atol=1e-12)


def test_sampler_is_reproducible():
    a = DirectionSampler(Simplex(4), 11)
    b = DirectionSampler(Simplex(4), 11)
    np.testing.assert_array_equal([a.sample() for _ in range(5)], [b.sample() for _ in range(5)])
