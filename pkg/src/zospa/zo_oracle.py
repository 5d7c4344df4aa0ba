"""Inexact zeroth-order oracle and the two-point gradient estimator.

The oracle returns ``phi(z, xi) + delta(z)``: ``xi`` is zero-mean stochastic
noise drawn once per estimator call and shared by both probes, ``delta`` a
deterministic perturbation bounded by a declared ``Delta``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import ConfigurationError, DomainError, InvalidInputError, ProbeInfeasibleError
from .geometry import BlockPoint, aq_squared, make_geometry
from .feasible_sets import DirectionSampler, FeasibleSet, Product, Simplex, default_geometry_kind


@dataclass
class SaddleFunction:
    """Wrap plain callables into the problem interface used by the solvers.

    ``evaluate(x, y)`` must accept stacks of points (one per row).
    """

    evaluate: Callable
    n_x: int
    n_y: int
    lipschitz_M: float
    gradient_fn: Optional[Callable] = None
    feasible_set: Optional[FeasibleSet] = None
    gap_fn: Optional[Callable] = None

    def value(self, x, y):
        return np.asarray(self.evaluate(np.asarray(x, float), np.asarray(y, float)), dtype=float)

    def gradient(self, x, y):
        if self.gradient_fn is None:
            raise ConfigurationError("this function has no analytic gradient")
        return self.gradient_fn(np.asarray(x, float), np.asarray(y, float))

    @property
    def has_gradient(self) -> bool:
        return self.gradient_fn is not None

    def gradient_bound(self, q: float) -> float:
        return self.lipschitz_M

    def saddle_gap(self, x, y, set_x=None, set_y=None):
        if self.gap_fn is None:
            raise ConfigurationError("this function has no gap evaluator")
        return self.gap_fn(np.asarray(x, float), np.asarray(y, float), set_x, set_y)


def linear_saddle(a, b, feasible_set: Optional[Product] = None) -> SaddleFunction:
    """``<a, x> - <b, y>``: gradient ``(a, -b)``, ``M = ||(a, b)||_2``.

    The gap has the closed form ``<a, x> + <b, y> + h_X(-a) + h_Y(-b)`` with
    ``h`` the support function of the block sets.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)

    def gap(x, y, set_x, set_y):
        set_x = set_x or feasible_set.left
        set_y = set_y or feasible_set.right
        return x @ a + y @ b + set_x.support(-a) + set_y.support(-b)

    return SaddleFunction(
        evaluate=lambda x, y: x @ a - y @ b,
        n_x=a.size,
        n_y=b.size,
        lipschitz_M=float(np.hypot(np.linalg.norm(a), np.linalg.norm(b))),
        gradient_fn=lambda x, y: (np.broadcast_to(a, x.shape).copy(), np.broadcast_to(-b, y.shape).copy()),
        feasible_set=feasible_set,
        gap_fn=gap if feasible_set is not None else None,
    )


# --------------------------------------------------------------------------
# noise


class GaussianNoise:
    """Additive ``N(0, sigma^2)`` on the function value.

    The draw is shared by the two probes, so it cancels in the estimator's
    difference and only shows up in single evaluations.
    """

    def __init__(self, sigma: float):
        if sigma < 0:
            raise ConfigurationError("sigma must be nonnegative")
        self.sigma = float(sigma)

    def single(self, problem, x, y, rng):
        return self.sigma * rng.standard_normal(np.shape(x)[:-1])

    def pair(self, problem, xp, yp, xm, ym, rngs):
        g = self.sigma * np.array([r.standard_normal() for r in rngs])
        return g, g


class MultiplicativeUniform:
    """Entrywise matrix noise ``C_ij (1 + f U_ij)``, ``U_ij ~ Uniform(-1, 1)``.

    Needs a problem with a payoff matrix ``C`` and bilinear value
    ``y^T C x``.  The perturbed matrix is redrawn per call and shared by both
    probes.
    """

    def __init__(self, fraction: float):
        if not 0 <= fraction < 1:
            raise ConfigurationError("fraction must lie in [0, 1)")
        self.fraction = float(fraction)

    @staticmethod
    def _matrix(problem):
        C = getattr(problem, "C", None)
        if C is None:
            raise ConfigurationError("matrix noise needs a problem with a payoff matrix")
        return C

    def single(self, problem, x, y, rng):
        C = self._matrix(problem)
        U = rng.uniform(-1.0, 1.0, size=C.shape)
        return self.fraction * np.einsum("...k,...k->...", y, x @ (C * U).T)

    def pair(self, problem, xp, yp, xm, ym, rngs):
        C = self._matrix(problem)
        out_p = np.empty(len(rngs))
        out_m = np.empty(len(rngs))
        for i, r in enumerate(rngs):
            E = self.fraction * C * r.uniform(-1.0, 1.0, size=C.shape)
            out_p[i] = yp[i] @ E @ xp[i]
            out_m[i] = ym[i] @ E @ xm[i]
        return out_p, out_m


class MultiplicativeNormal:
    """Entrywise matrix noise ``C_ij + N(0, s_ij^2)``.

    ``interpretation="std"`` sets ``s_ij = f |C_ij|``; ``"variance"`` sets
    ``s_ij^2 = f |C_ij|``.  A full Gaussian perturbation matrix is never
    materialized: the two probe values ``y_+^T E x_+`` and ``y_-^T E x_-`` are
    jointly Gaussian with covariances ``(y_a o y_b)^T S (x_a o x_b)``
    (``S = s o s``), so the pair is drawn exactly from a 2x2 factorization.
    """

    def __init__(self, fraction: float, interpretation: str = "std"):
        if fraction < 0:
            raise ConfigurationError("fraction must be nonnegative")
        if interpretation not in ("std", "variance"):
            raise ConfigurationError("interpretation must be 'std' or 'variance'")
        self.fraction = float(fraction)
        self.interpretation = interpretation
        self._cache = (None, None)

    def _var_matrix(self, problem):
        C = getattr(problem, "C", None)
        if C is None:
            raise ConfigurationError("matrix noise needs a problem with a payoff matrix")
        key, S = self._cache
        if key is not C:
            S = (self.fraction * np.abs(C)) ** 2 if self.interpretation == "std" else self.fraction * np.abs(C)
            self._cache = (C, S)
        return S

    def single(self, problem, x, y, rng):
        S = self._var_matrix(problem)
        var = np.einsum("...k,...k->...", y * y, (x * x) @ S.T)
        return np.sqrt(var) * rng.standard_normal(np.shape(var))

    def pair(self, problem, xp, yp, xm, ym, rngs):
        S = self._var_matrix(problem)
        X = np.concatenate([xp * xp, xm * xm, xp * xm])
        Y = np.concatenate([yp * yp, ym * ym, yp * ym])
        q = np.einsum("ik,ik->i", Y, X @ S.T).reshape(3, -1)
        vp, vm, cov = np.maximum(q[0], 0.0), np.maximum(q[1], 0.0), q[2]
        g = np.array([r.standard_normal(2) for r in rngs])
        sp = np.sqrt(vp)
        a = np.divide(cov, sp, out=np.zeros_like(cov), where=sp > 0)
        b = np.sqrt(np.maximum(vm - a * a, 0.0))
        return sp * g[:, 0], a * g[:, 0] + b * g[:, 1]


@dataclass
class DeterministicNoise:
    """Bounded deterministic perturbation ``delta(x, y)`` with ``|delta| <= bound``."""

    fn: Callable
    bound: float

    def __call__(self, x, y):
        return self.fn(x, y)


def sine_delta(bound: float, n_x: int, n_y: int, frequency: float = 1.0, seed: int = 0,
               direction=None, phase=None) -> DeterministicNoise:
    """``bound * sin(<w, z> + phase)`` with ``||w|| = frequency``.

    ``w`` points along ``direction`` when given, else along a random unit
    vector; ``phase`` is random unless given.
    """
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(n_x + n_y) if direction is None else np.array(direction, dtype=float)
    if w.shape != (n_x + n_y,) or not np.linalg.norm(w) > 0:
        raise InvalidInputError("direction must be a nonzero vector of the full dimension")
    w *= frequency / np.linalg.norm(w)
    ph = rng.uniform(0, 2 * math.pi) if phase is None else float(phase)
    wx, wy = w[:n_x], w[n_x:]
    return DeterministicNoise(lambda x, y: bound * np.sin(x @ wx + y @ wy + ph), float(bound))


def sign_delta(bound: float, direction, center) -> DeterministicNoise:
    """``bound * sign(<u, z - c>)``: the pattern that maximizes the estimator bias at ``c``.

    Every probe pair straddling the hyperplane contributes the full ``2 bound``.
    """
    u = np.asarray(direction, dtype=float)
    c = np.asarray(center, dtype=float)
    if u.shape != c.shape or u.ndim != 1:
        raise InvalidInputError("direction and center must be vectors of one length")

    def fn(x, y):
        z = np.concatenate([np.atleast_2d(x), np.atleast_2d(y)], axis=-1)
        out = bound * np.sign((z - c) @ u)
        return out if np.ndim(x) > 1 else out[0]

    return DeterministicNoise(fn, float(bound))


def zero_delta() -> DeterministicNoise:
    return DeterministicNoise(lambda x, y: np.zeros(np.shape(x)[:-1]), 0.0)


@dataclass
class NoiseModel:
    stochastic: object = None
    delta: Optional[DeterministicNoise] = None

    @property
    def Delta(self) -> float:
        return 0.0 if self.delta is None else self.delta.bound


class OracleCounter:
    """Thread-safe tally of oracle evaluations."""

    def __init__(self):
        self._lock = threading.Lock()
        self.calls = 0

    def add(self, k: int) -> None:
        with self._lock:
            self.calls += int(k)


# --------------------------------------------------------------------------
# evaluation


def _check_domain(domain, x, y, tol, what):
    if domain is None:
        return
    z = np.concatenate([np.atleast_2d(x), np.atleast_2d(y)], axis=-1)
    ok = np.atleast_1d(domain.contains(z, tol))
    if not np.all(ok):
        bad = int(np.argmin(ok))
        raise DomainError(f"{what} outside the oracle domain (row {bad}): z={z[bad]}")


def noisy_value(f, nm: NoiseModel, z: BlockPoint, rng, counter: OracleCounter = None,
                domain: FeasibleSet = None, tol: float = 1e-9) -> float:
    """One oracle call ``phi(z) + xi + delta(z)``."""
    _check_domain(domain, z.x, z.y, tol, "evaluation point")
    val = float(f.value(z.x, z.y))
    if nm.stochastic is not None:
        val += float(nm.stochastic.single(f, z.x, z.y, rng))
    if nm.delta is not None:
        val += float(nm.delta(z.x, z.y))
    if counter is not None:
        counter.add(1)
    return val


@dataclass
class EstimatorConfig:
    tau: float
    sampler: DirectionSampler
    domain: Optional[FeasibleSet] = None
    tol: float = 1e-9

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigurationError("smoothing radius must be positive")


def estimate_rows(f, nm: NoiseModel, tau: float, Z: np.ndarray, E: np.ndarray, n_x: int,
                  rngs, domain=None, tol: float = 1e-9) -> np.ndarray:
    """Row-wise two-point estimates ``n (f(z + tau e) - f(z - tau e)) / (2 tau) * (e_x, -e_y)``."""
    n = Z.shape[1]
    ZP = Z + tau * E
    ZM = Z - tau * E
    if domain is not None:
        ok = domain.contains(ZP, tol) & domain.contains(ZM, tol)
        if not np.all(ok):
            bad = int(np.argmin(ok))
            raise ProbeInfeasibleError(
                f"probe left the oracle domain: row={bad} tau={tau:.3e} "
                f"z={Z[bad]} e={E[bad]} min(z-tau|e|)={np.min(Z[bad] - tau * np.abs(E[bad])):.3e}"
            )
    S = Z.shape[0]
    both = np.concatenate([ZP, ZM])
    vals = f.value(both[:, :n_x], both[:, n_x:])
    diff = vals[:S] - vals[S:]
    if nm.stochastic is not None:
        npl, nmi = nm.stochastic.pair(f, ZP[:, :n_x], ZP[:, n_x:], ZM[:, :n_x], ZM[:, n_x:], rngs)
        diff = diff + (npl - nmi)
    if nm.delta is not None:
        dv = nm.delta(both[:, :n_x], both[:, n_x:])
        diff = diff + (dv[:S] - dv[S:])
    G = (n / (2.0 * tau)) * diff[:, None] * E
    G[:, n_x:] *= -1.0
    return G


def two_point_estimate(f, nm: NoiseModel, cfg: EstimatorConfig, z: BlockPoint, rng,
                       counter: OracleCounter = None) -> BlockPoint:
    """Single two-point gradient estimate at ``z`` (two oracle calls)."""
    if cfg.sampler.dim != z.n:
        raise InvalidInputError("sampler dimension does not match the point")
    e = cfg.sampler.sample()
    G = estimate_rows(f, nm, cfg.tau, z.flat()[None, :], e[None, :], z.n_x, [rng], cfg.domain, cfg.tol)
    if counter is not None:
        counter.add(2)
    return BlockPoint.from_flat(G[0], z.n_x)


def smoothed_value(f, cfg: EstimatorConfig, z: BlockPoint, samples: int, rng=None):
    """Monte Carlo estimate of ``E_e f(z + tau e)``: returns ``(mean, stderr)``."""
    if samples < 1:
        raise InvalidInputError("need at least one sample")
    E = cfg.sampler.sample_many(samples)
    P = z.flat()[None, :] + cfg.tau * E
    vals = np.asarray(f.value(P[:, : z.n_x], P[:, z.n_x:]), dtype=float)
    mean = float(vals.mean())
    stderr = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return mean, stderr


# --------------------------------------------------------------------------
# parameter rules


def _leaf_kinds(s: FeasibleSet):
    leaves = s.leaves() if isinstance(s, Product) else [s]
    return {"simplex" if isinstance(leaf, Simplex) else "box_or_ball" for leaf in leaves}


def resolve_tau_delta(eps: float, M: float, s: FeasibleSet, neighborhood_defined: bool, geometry=None):
    """Smoothing radius and deterministic-noise budget for accuracy ``eps``.

    With the oracle defined around the set: ``tau = eps/M`` and
    ``Delta = eps^2 / (M Omega n a_q)``.  Without it, ``tau`` is also capped
    at ``eps/(4nM)`` (simplexes) or ``eps/(sqrt(8n) M)`` (boxes, balls), and
    the ``n`` in ``Delta`` becomes ``n^2`` or ``n^(3/2)``.
    """
    if not (eps > 0 and M > 0):
        raise ConfigurationError("eps and M must be positive")
    n = s.dim
    g = geometry or make_geometry(default_geometry_kind(s), s)
    tau = eps / M
    power = 1.0
    if not neighborhood_defined:
        kinds = _leaf_kinds(s)
        caps = []
        if "simplex" in kinds:
            caps.append(eps / (4 * n * M))
            power = 2.0
        if "box_or_ball" in kinds:
            caps.append(eps / (math.sqrt(8 * n) * M))
            power = max(power, 1.5)
        tau = min([tau] + caps)
    delta = eps ** 2 / (M * g.omega * n ** power * g.a_q)
    return tau, delta


def aq_for(q: float, n: int) -> float:
    return math.sqrt(aq_squared(q, n))
