"""zoSPA, the first-order mirror-descent baseline, and the saddle gap.

Both methods share one engine that advances several independent chains
(one per seed) in lockstep, each chain a row of the iterate matrix.  A chain's
random streams depend only on its own seed, so a seed's trajectory does not
depend on which other seeds run beside it up to floating-point reduction
order; reruns of the same seed list are bitwise identical.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .exceptions import ConfigurationError
from .geometry import BlockPoint, Geometry, entropy_step_rows
from .zo_oracle import EstimatorConfig, NoiseModel, estimate_rows
from .feasible_sets import DirectionSampler, FeasibleSet, Product, Simplex

LEMMA_C = 3.0


@dataclass
class SolverConfig:
    """``step`` is ``"theory"``, ``"first_order"`` or a positive constant."""

    iterations: int
    step: Union[str, float] = "theory"
    seed: int = 0
    record_every: Optional[int] = None

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ConfigurationError("iterations must be a positive integer")
        if isinstance(self.step, str):
            if self.step not in ("theory", "first_order"):
                raise ConfigurationError(f"unknown step rule {self.step!r}")
        elif not self.step > 0:
            raise ConfigurationError("a constant step must be positive")
        if self.record_every is not None and self.record_every < 1:
            raise ConfigurationError("record_every must be positive")

    @property
    def cadence(self) -> int:
        return self.record_every or max(1, self.iterations // 200)


@dataclass(frozen=True)
class RunRecord:
    iteration: int
    gap: float
    oracle_calls: int
    elapsed: float


@dataclass
class RunResult:
    seed: int
    z_bar: BlockPoint
    trace: list
    step: float
    oracle_calls: int


class Averager:
    """Running ``sum gamma_k z_k / sum gamma_k`` over a stack of chains."""

    def __init__(self, shape):
        self.weighted_sum = np.zeros(shape)
        self.Gamma = 0.0

    def add(self, Z: np.ndarray, gamma: float) -> None:
        self.weighted_sum += gamma * Z
        self.Gamma += gamma

    def mean(self) -> np.ndarray:
        return self.weighted_sum / self.Gamma


# --------------------------------------------------------------------------
# step sizes


def m_all_squared(geometry: Geometry, n: int, M: float, tau: float, Delta: float) -> float:
    """``2 (c n M^2 + n^2 Delta^2 / tau^2) a_q^2`` with ``c = 3``."""
    noise = (n * Delta / tau) ** 2 if Delta > 0 else 0.0
    return 2.0 * (LEMMA_C * n * M * M + noise) * geometry.a_q_sq


def theory_step(geometry: Geometry, s: FeasibleSet, M: float, tau: float, Delta: float, N: int) -> float:
    """Constant zoSPA step ``Omega / (M_all sqrt(N))``."""
    if not (M > 0 and tau > 0 and N >= 1 and Delta >= 0):
        raise ConfigurationError("theory step needs M, tau, N > 0 and Delta >= 0")
    return geometry.omega / (math.sqrt(m_all_squared(geometry, s.dim, M, tau, Delta)) * math.sqrt(N))


def first_order_step(problem, geometry: Geometry, N: int) -> float:
    """Mirror-descent step ``Omega / (G sqrt(N))``, ``G`` bounding the gradient in the dual norm."""
    G = problem.gradient_bound(geometry.q)
    return geometry.omega / (G * math.sqrt(N))


def estimate_lipschitz(problem, s: FeasibleSet, samples: int = 1000, seed: int = 0) -> float:
    """Heuristic ``M``: 1.5 times the largest sampled gradient norm.

    Uses the analytic gradient when present, central differences otherwise.
    """
    from .problems import finite_difference_gradient

    rng = np.random.default_rng(seed)
    pts = s.sample_points(rng, samples)
    nx = s.split
    has_grad = getattr(problem, "has_gradient", True)
    if has_grad:
        gx, gy = problem.gradient(pts[:, :nx], pts[:, nx:])
        norms = np.sqrt(np.sum(gx ** 2, axis=1) + np.sum(gy ** 2, axis=1))
    else:
        norms = [np.linalg.norm(np.concatenate(finite_difference_gradient(problem, p[:nx], p[nx:]))) for p in pts]
    return 1.5 * float(np.max(norms))


def problem_M(problem, s: FeasibleSet) -> float:
    M = getattr(problem, "lipschitz_M", None)
    return float(M) if M else estimate_lipschitz(problem, s)


# --------------------------------------------------------------------------
# gap


def saddle_gap(problem, s: Product, z_bar):
    """``max_{y in Y} phi(x, y) - min_{x in X} phi(x, y)`` over ``s = X x Y``.

    ``z_bar`` is a :class:`BlockPoint` or a stack of flat points.
    """
    if isinstance(z_bar, BlockPoint):
        return float(problem.saddle_gap(z_bar.x, z_bar.y, s.left, s.right))
    Z = np.asarray(z_bar, dtype=float)
    return problem.saddle_gap(Z[..., : s.split], Z[..., s.split:], s.left, s.right)


# --------------------------------------------------------------------------
# engine


def _prox_rows(geometry: Geometry, s: Product):
    """Fast row-wise prox for the two blocks of ``s`` (no argument checks)."""
    nx = s.split
    blocks = [(slice(0, nx), s.left), (slice(nx, s.dim), s.right)]
    if geometry.kind == "entropy":
        for _, leaf in blocks:
            if not isinstance(leaf, Simplex):
                raise ConfigurationError("entropy geometry needs simplex blocks")

        def step(Z, G):
            out = np.empty_like(Z)
            for sl, leaf in blocks:
                out[:, sl] = entropy_step_rows(Z[:, sl], G[:, sl], leaf.floor, leaf.mass)
            return out
    else:
        def step(Z, G):
            out = np.empty_like(Z)
            for sl, leaf in blocks:
                out[:, sl] = leaf.project(Z[:, sl] - G[:, sl])
            return out
    return step


def _streams(seed: int):
    dir_ss, noise_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(dir_ss), np.random.default_rng(noise_ss)


def run_chains(problem, s: Product, geometry: Geometry, *, method: str, iterations: int,
               seeds: Sequence[int], step: Union[str, float] = "theory",
               noise: Optional[NoiseModel] = None, tau: Optional[float] = None,
               record_every: Optional[int] = None, domain: Optional[FeasibleSet] = None,
               gap_set: Optional[Product] = None, M: Optional[float] = None,
               chunk: int = 256) -> list:
    """Run ``method`` ("zospa" or "mirror_descent") for every seed in ``seeds``.

    ``s`` is the operating set (possibly shrunk); ``gap_set`` is the set the
    recorded gaps refer to (defaults to ``s``); ``domain`` is where the
    oracle may be evaluated (``None`` means anywhere).
    """
    if not isinstance(s, Product):
        raise ConfigurationError("saddle problems need a product set X x Y")
    if (s.left.dim, s.right.dim) != (problem.n_x, problem.n_y):
        raise ConfigurationError(
            f"set blocks {(s.left.dim, s.right.dim)} do not match problem {(problem.n_x, problem.n_y)}"
        )
    if geometry.n != s.dim:
        raise ConfigurationError("geometry was built for a set of another dimension")
    if method not in ("zospa", "mirror_descent"):
        raise ConfigurationError(f"unknown method {method!r}")
    seeds = [int(v) for v in seeds]
    if not seeds:
        raise ConfigurationError("need at least one seed")
    cfg = SolverConfig(iterations, step, seeds[0], record_every)
    noise = noise or NoiseModel()
    gap_set = gap_set or s
    nx, n, S = s.split, s.dim, len(seeds)
    zo = method == "zospa"

    if zo:
        if tau is None or not tau > 0:
            raise ConfigurationError("zospa needs a positive smoothing radius tau")
        if domain is not None and not isinstance(domain, Product):
            raise ConfigurationError("oracle domain must be a product set")
    elif not getattr(problem, "has_gradient", True):
        raise ConfigurationError("mirror descent needs an analytic gradient")

    if isinstance(step, str):
        if step == "theory" and zo:
            gamma = theory_step(geometry, s, M or problem_M(problem, s), tau, noise.Delta, iterations)
        else:
            gamma = first_order_step(problem, geometry, iterations)
    else:
        gamma = float(step)

    prox = _prox_rows(geometry, s)
    Z = np.tile(s.center(), (S, 1))
    avg = Averager(Z.shape)
    traces = [[] for _ in range(S)]
    samplers, noise_rngs = [], []
    for sd in seeds:
        d_rng, n_rng = _streams(sd)
        samplers.append(DirectionSampler(s, d_rng))
        noise_rngs.append(n_rng)
    buf = np.empty((S, chunk, n))
    per_iter = 2 if zo else 1
    cadence = cfg.cadence
    t0 = time.perf_counter()
    for k in range(1, iterations + 1):
        avg.add(Z, gamma)
        if zo:
            j = (k - 1) % chunk
            if j == 0:
                for i, smp in enumerate(samplers):
                    buf[i] = smp.sample_many(chunk)
            G = estimate_rows(problem, noise, tau, Z, buf[:, j, :], nx, noise_rngs, domain)
        else:
            gx, gy = problem.gradient(Z[:, :nx], Z[:, nx:])
            G = np.concatenate([gx, -gy], axis=1)
        Z = prox(Z, gamma * G)
        if k % cadence == 0 or k == iterations:
            gaps = np.atleast_1d(saddle_gap(problem, gap_set, avg.mean()))
            elapsed = time.perf_counter() - t0
            for i in range(S):
                traces[i].append(RunRecord(k, max(float(gaps[i]), 0.0), per_iter * k, elapsed))
    Zbar = avg.mean()
    return [
        RunResult(sd, BlockPoint.from_flat(Zbar[i], nx), traces[i], gamma, per_iter * iterations)
        for i, sd in enumerate(seeds)
    ]


def zospa_run(problem, s: Product, geometry: Geometry, noise: Optional[NoiseModel],
              estimator_cfg: EstimatorConfig, solver_cfg: SolverConfig, gap_set=None):
    """Algorithm: start at the prox center, estimate, mirror-step, average.

    Directions and noise come from streams derived from ``solver_cfg.seed``.
    Returns ``(z_bar, trace)``.
    """
    (res,) = run_chains(problem, s, geometry, method="zospa", iterations=solver_cfg.iterations,
                        seeds=[solver_cfg.seed], step=solver_cfg.step, noise=noise,
                        tau=estimator_cfg.tau, record_every=solver_cfg.record_every,
                        domain=estimator_cfg.domain, gap_set=gap_set)
    return res.z_bar, res.trace


def mirror_descent_run(problem, s: Product, geometry: Geometry, solver_cfg: SolverConfig, gap_set=None):
    """Same loop with the exact block gradient ``(grad_x, -grad_y)``."""
    if not getattr(problem, "has_gradient", True):
        raise ConfigurationError("mirror descent needs an analytic gradient")
    (res,) = run_chains(problem, s, geometry, method="mirror_descent", iterations=solver_cfg.iterations,
                        seeds=[solver_cfg.seed], step=solver_cfg.step,
                        record_every=solver_cfg.record_every, gap_set=gap_set)
    return res.z_bar, res.trace
