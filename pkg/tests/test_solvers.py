import math

import numpy as np
import pytest

from zospa import (
    BlockPoint,
    Box,
    DirectionSampler,
    EstimatorConfig,
    GaussianNoise,
    MatrixGame,
    NoiseModel,
    Product,
    SeparableQuadratic,
    Simplex,
    SolverConfig,
    block_prox_step,
    default_geometry,
    first_order_step,
    linear_saddle,
    make_geometry,
    mirror_descent_run,
    run_chains,
    saddle_gap,
    theory_step,
    two_point_estimate,
    zospa_run,
)
from zospa.exceptions import ConfigurationError, ProbeInfeasibleError
from zospa.solvers import Averager, estimate_lipschitz, m_all_squared

GAME2 = MatrixGame([[0.0, 1.0], [1.0, 0.0]])


def test_theory_step_formula():
    s = Box.cube(3, 0, 1)
    s = Product(s, s)
    g = make_geometry("euclidean", s)
    N = 400
    step = theory_step(g, s, 2.0, 0.1, 0.0, N)
    assert step == pytest.approx(g.omega / (2.0 * math.sqrt(6 * 6 * N)))
    assert theory_step(g, s, 2.0, 0.1, 0.0, 4 * N) == pytest.approx(step / 2)
    assert theory_step(g, s, 2.0, 0.1, 0.0, 2 * N) == pytest.approx(step / math.sqrt(2))
    with pytest.raises(ConfigurationError):
        theory_step(g, s, 0.0, 0.1, 0.0, N)


def test_m_all_with_delta_and_entropy():
    s = GAME2.feasible_set
    g = make_geometry("entropy", s)
    val = m_all_squared(g, 4, 1.0, 0.1, 0.01)
    assert val == pytest.approx(2 * (3 * 4 + (4 * 0.01 / 0.1) ** 2) * g.a_q_sq)


def test_solver_config_validation():
    with pytest.raises(ConfigurationError):
        SolverConfig(0)
    with pytest.raises(ConfigurationError):
        SolverConfig(10, step="fast")
    with pytest.raises(ConfigurationError):
        SolverConfig(10, step=-1.0)
    assert SolverConfig(1000).cadence == 5
    assert SolverConfig(1000, record_every=7).cadence == 7


def test_averager_weights():
    a = Averager((1, 2))
    a.add(np.array([[1.0, 0.0]]), 1.0)
    a.add(np.array([[0.0, 1.0]]), 3.0)
    np.testing.assert_allclose(a.mean(), [[0.25, 0.75]])


def test_zero_matrix_gap_is_zero():
    game = MatrixGame(np.zeros((3, 3)))
    s = game.feasible_set
    (res,) = run_chains(game, s, default_geometry(s), method="zospa", iterations=50, seeds=[0],
                        step=0.1, tau=1e-3, domain=s)
    assert all(r.gap == 0.0 for r in res.trace)


def test_mirror_descent_symmetric_game():
    s = GAME2.feasible_set
    z_bar, trace = mirror_descent_run(GAME2, s, default_geometry(s), SolverConfig(10_000, step="first_order"))
    assert trace[-1].gap <= 0.05
    np.testing.assert_allclose(z_bar.flat(), 0.5, atol=0.05)


def test_zero_gradient_step_stays_uniform():
    s = Product(Simplex(3), Simplex(3))
    g = default_geometry(s)
    z = BlockPoint(np.full(3, 1 / 3), np.full(3, 1 / 3))
    out = block_prox_step(g, s, z, BlockPoint(np.zeros(3), np.zeros(3)))
    np.testing.assert_allclose(out.flat(), 1 / 3, atol=1e-15)


def test_zospa_symmetric_game():
    s = GAME2.feasible_set
    g = default_geometry(s)
    cfg = EstimatorConfig(1e-3, DirectionSampler(s, 0), domain=s)
    z_bar, trace = zospa_run(GAME2, s.shrink(1e-3), g, NoiseModel(), cfg,
                             SolverConfig(100_000, step="first_order", record_every=10_000), gap_set=s)
    assert trace[-1].gap <= 0.05
    assert [r.iteration for r in trace] == list(range(10_000, 100_001, 10_000))
    assert trace[-1].oracle_calls == 200_000


def _reference_zospa(problem, s, geometry, gamma, tau, N, seed, noise):
    """Plain per-iteration loop built from the public pieces."""
    d_ss, n_ss = np.random.SeedSequence(seed).spawn(2)
    sampler = DirectionSampler(s, np.random.default_rng(d_ss), chunk=256)
    rng = np.random.default_rng(n_ss)
    cfg = EstimatorConfig(tau, sampler, domain=None)
    nx = s.split
    z = BlockPoint.from_flat(s.center(), nx)
    total = np.zeros(s.dim)
    for _ in range(N):
        total += gamma * z.flat()
        g = two_point_estimate(problem, noise, cfg, z, rng)
        z = block_prox_step(geometry, s, z, BlockPoint(gamma * g.x, gamma * g.y))
    return total / (gamma * N)


@pytest.mark.parametrize("kind", ["game", "box"])
def test_engine_matches_reference_loop(kind):
    if kind == "game":
        problem = MatrixGame(np.random.default_rng(0).uniform(size=(3, 4)))
        s = problem.feasible_set.shrink(0.01)
        noise = NoiseModel()
    else:
        problem = SeparableQuadratic.random(2, seed=0)
        s = problem.feasible_set
        noise = NoiseModel(GaussianNoise(0.3))
    g = default_geometry(s)
    results = run_chains(problem, s, g, method="zospa", iterations=600, seeds=[3, 8], step=0.05,
                         tau=1e-3, noise=noise)
    for res in results:
        ref = _reference_zospa(problem, s, g, 0.05, 1e-3, 600, res.seed, noise)
        np.testing.assert_allclose(res.z_bar.flat(), ref, atol=1e-10)


def test_seed_trajectory_independent_of_companions():
    problem = MatrixGame(np.random.default_rng(0).uniform(size=(4, 4)))
    s = problem.feasible_set.shrink(0.01)
    g = default_geometry(s)
    kw = dict(method="zospa", iterations=300, step=0.05, tau=1e-3)
    alone = run_chains(problem, s, g, seeds=[5], **kw)[0]
    mixed = run_chains(problem, s, g, seeds=[1, 5, 9], **kw)[1]
    np.testing.assert_allclose(alone.z_bar.flat(), mixed.z_bar.flat(), atol=1e-13)
    again = run_chains(problem, s, g, seeds=[5], **kw)[0]
    np.testing.assert_array_equal(alone.z_bar.flat(), again.z_bar.flat())


def test_iterates_stay_feasible():
    problem = MatrixGame(np.random.default_rng(2).uniform(size=(5, 5)))
    s = problem.feasible_set.shrink(0.02)
    res = run_chains(problem, s, default_geometry(s), method="zospa", iterations=200, seeds=[0],
                     step=0.5, tau=0.02, domain=problem.feasible_set)[0]
    assert s.contains(res.z_bar.flat(), 1e-12)


def test_probe_infeasibility_aborts():
    problem = MatrixGame([[5.0, 0.0, 1.0], [0.0, 1.0, 2.0], [3.0, 0.0, 0.0]])
    s = problem.feasible_set
    with pytest.raises(ProbeInfeasibleError):
        run_chains(problem, s, default_geometry(s), method="zospa", iterations=10, seeds=[0],
                   step=50.0, tau=0.1, domain=s)


def test_configuration_errors_before_iterating():
    problem = MatrixGame(np.eye(3))
    s = problem.feasible_set
    g = default_geometry(s)
    with pytest.raises(ConfigurationError):
        run_chains(problem, Product(Simplex(2), Simplex(3)), g, method="zospa", iterations=5, seeds=[0], tau=0.1)
    with pytest.raises(ConfigurationError):
        run_chains(problem, s, g, method="zospa", iterations=5, seeds=[0])
    with pytest.raises(ConfigurationError):
        run_chains(problem, s, g, method="newton", iterations=5, seeds=[0], tau=0.1)
    with pytest.raises(ConfigurationError):
        run_chains(problem, s, g, method="zospa", iterations=5, seeds=[], tau=0.1)
    box = Product(Box.cube(3, 0, 1), Box.cube(3, 0, 1))
    with pytest.raises(ConfigurationError):
        run_chains(problem, box, make_geometry("entropy", s), method="zospa", iterations=5, seeds=[0], tau=0.1)


def test_first_order_step_and_gap_helpers():
    problem = MatrixGame([[1.0, -2.0], [0.5, 0.0]])
    s = problem.feasible_set
    g = default_geometry(s)
    assert first_order_step(problem, g, 100) == pytest.approx(g.omega / (2.0 * 10))
    z = np.array([[0.5, 0.5, 0.5, 0.5], [1.0, 0.0, 1.0, 0.0]])
    gaps = saddle_gap(problem, s, z)
    np.testing.assert_allclose(gaps, problem.saddle_gap(z[:, :2], z[:, 2:]))


def test_estimate_lipschitz_for_black_box():
    f = linear_saddle([3.0, 4.0], [0.0], Product(Box.cube(2, 0, 1), Box.cube(1, 0, 1)))
    f.gradient_fn = None
    assert estimate_lipschitz(f, f.feasible_set, samples=20) == pytest.approx(7.5, rel=1e-6)


def test_linear_problem_converges_to_corner():
    s = Product(Box.cube(2, -1, 1), Box.cube(1, -1, 1))
    f = linear_saddle([1.0, -1.0], [0.5], s)
    res = run_chains(f, s.shrink(0.05), default_geometry(s), method="zospa", iterations=20_000, seeds=[0],
                     step="theory", tau=0.05, domain=s, gap_set=s)[0]
    assert res.trace[-1].gap < res.trace[0].gap
    assert res.trace[-1].gap < 0.3
