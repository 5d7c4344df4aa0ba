"""Numerical certificates for the estimator and geometry inequalities.

Each check returns a :class:`CheckReport`.  Monte Carlo slack is uniform:
three standard errors of the estimated quantity, stated in the report.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize

from .exceptions import ConfigurationError
from .geometry import aq_squared, lp_norm
from .zo_oracle import (
    EstimatorConfig,
    GaussianNoise,
    NoiseModel,
    estimate_rows,
    linear_saddle,
    sign_delta,
    sine_delta,
)
from .feasible_sets import Box, DirectionSampler, Product

SLACK_SE = 3.0


@dataclass(frozen=True)
class CheckReport:
    check_name: str
    bound: float
    observed: float
    samples: int
    passed: bool
    confidence_note: str
    slack: float = 0.0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] {self.check_name}: observed={self.observed:.6g} bound={self.bound:.6g} "
                f"slack={self.slack:.3g} samples={self.samples} ({self.confidence_note})")


def _report(name, bound, observed, samples, note, slack=0.0) -> CheckReport:
    return CheckReport(name, float(bound), float(observed), int(samples),
                       bool(observed <= bound + slack), note, float(slack))


def sphere(rng: np.random.Generator, k: int, n: int) -> np.ndarray:
    g = rng.standard_normal((k, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _qnorm_rows(E: np.ndarray, q: float) -> np.ndarray:
    if math.isinf(q):
        return np.abs(E).max(axis=1)
    return np.sum(np.abs(E) ** q, axis=1) ** (1.0 / q)


def _box_problem(n: int, seed: int):
    """Linear test saddle on ``[-1, 1]^n`` split evenly into x and y."""
    rng = np.random.default_rng(seed)
    nx = n // 2
    s = Product(Box.cube(nx, -1.0, 1.0), Box.cube(n - nx, -1.0, 1.0))
    a = rng.uniform(-1, 1, nx)
    b = rng.uniform(-1, 1, n - nx)
    return linear_saddle(a, b, s), s


# --------------------------------------------------------------------------
# moment constant


def check_aq_bound(n: int, q: float, samples: int = 200_000, seed: int = 0) -> CheckReport:
    """``sqrt(E ||e||_q^4)`` over uniform sphere directions against ``a_q``."""
    if n < 3:
        raise ConfigurationError("the moment bound is stated for n >= 3")
    if not (q == 2 or math.isinf(q)):
        raise ConfigurationError("q must be 2 or inf")
    rng = np.random.default_rng(seed)
    acc, acc2, done = 0.0, 0.0, 0
    while done < samples:
        k = min(50_000, samples - done)
        v = _qnorm_rows(sphere(rng, k, n), q) ** 4
        acc += v.sum()
        acc2 += (v * v).sum()
        done += k
    m4 = acc / samples
    var = max(acc2 / samples - m4 * m4, 0.0)
    se = math.sqrt(var / samples) / (2 * math.sqrt(m4))
    bound = math.sqrt(aq_squared(q, n))
    qs = "inf" if math.isinf(q) else f"{q:g}"
    return _report(f"aq_bound(n={n},q={qs})", bound, math.sqrt(m4), samples,
                   "slack 3 se (delta method)", SLACK_SE * se)


# --------------------------------------------------------------------------
# estimator


def _estimates(f, nm, tau, z, E, nx, seed):
    """Estimator draws at one point ``z`` for every row of ``E`` (chunked)."""
    rng = np.random.default_rng(seed)
    out = np.empty_like(E)
    for start in range(0, E.shape[0], 4096):
        sl = slice(start, start + 4096)
        k = E[sl].shape[0]
        Z = np.broadcast_to(z, (k, z.size))
        rngs = [rng] * k if nm.stochastic is not None else None
        out[sl] = estimate_rows(f, nm, tau, Z, E[sl], nx, rngs)
    return out


def check_second_moment(problem=None, noise: Optional[NoiseModel] = None, cfg: Optional[EstimatorConfig] = None,
                        samples: int = 100_000, q: float = 2.0, n: int = 10, seed: int = 0) -> CheckReport:
    """``E ||g||_q^2`` against ``2 (3 n M^2 + n^2 Delta^2 / tau^2) a_q^2``.

    Defaults: the linear test saddle on a box in ``R^n`` with Gaussian value
    noise and a sine perturbation.  Directions are uniform on the full sphere.
    """
    if problem is None:
        problem, s = _box_problem(n, seed)
    else:
        s = problem.feasible_set
    nm = noise or NoiseModel(GaussianNoise(0.5), sine_delta(0.01, problem.n_x, problem.n_y, 3.0, seed))
    cfg = cfg or EstimatorConfig(0.05, DirectionSampler(s, seed + 1))
    nd = s.dim
    rng = np.random.default_rng(seed + 2)
    z = s.sample_points(rng, 1)[0]
    E = cfg.sampler.sample_many(samples)
    G = _estimates(problem, nm, cfg.tau, z, E, problem.n_x, seed + 3)
    v = _qnorm_rows(G, q) ** 2
    m, se = v.mean(), v.std(ddof=1) / math.sqrt(samples)
    M = problem.lipschitz_M
    bound = 2 * (3 * nd * M * M + (nd * nm.Delta / cfg.tau) ** 2) * aq_squared(q, nd)
    qs = "inf" if math.isinf(q) else f"{q:g}"
    return _report(f"second_moment(n={nd},q={qs})", bound, m, samples, "c=3, slack 3 se", SLACK_SE * se)


def check_estimator_bias(problem=None, Delta_pattern=None, cfg: Optional[EstimatorConfig] = None,
                         samples: int = 200_000, q: float = 2.0, n: int = 10, Delta: float = 0.01,
                         seed: int = 0) -> CheckReport:
    """``||E_e g - grad phi_hat||_q`` against ``Delta n a_q / tau``.

    For a linear problem the smoothed gradient equals the exact gradient, so
    the deviation is the mean of the perturbation part of the estimator.
    The default pattern is the sign pattern through the evaluation point,
    which makes every probe pair contribute the full ``2 Delta``.
    """
    if problem is None:
        problem, s = _box_problem(n, seed)
    else:
        s = problem.feasible_set
    nd = s.dim
    rng = np.random.default_rng(seed + 2)
    z = s.sample_points(rng, 1)[0]
    if Delta_pattern is None:
        Delta_pattern = sign_delta(Delta, sphere(rng, 1, nd)[0], z)
    cfg = cfg or EstimatorConfig(0.05, DirectionSampler(s, seed + 1))
    E = cfg.sampler.sample_many(samples)
    zero = linear_saddle(np.zeros(problem.n_x), np.zeros(problem.n_y))
    G = _estimates(zero, NoiseModel(delta=Delta_pattern), cfg.tau, z, E, problem.n_x, seed + 3)
    mean = G.mean(axis=0)
    se = G.std(axis=0, ddof=1) / math.sqrt(samples)
    dev = lp_norm(mean, q)
    # a norm is 1-Lipschitz in itself, so the coordinate errors bound its error
    slack = SLACK_SE * lp_norm(se, q)
    bound = Delta_pattern.bound * nd * math.sqrt(aq_squared(q, nd)) / cfg.tau
    qs = "inf" if math.isinf(q) else f"{q:g}"
    return _report(f"estimator_bias(n={nd},q={qs})", bound, dev, samples, "adversarial delta, slack 3 se", slack)


def check_smoothing_bias(problem=None, tau: float = 0.1, Delta: float = 0.0, grid: int = 10_000,
                         samples: int = 64, seed: int = 0) -> CheckReport:
    """``max |phi_hat(z) - phi(z)| - 3 se`` over a random grid plus vertices, against ``tau M + Delta``.

    The default problem is the monkey saddle on ``[-10, 10]^2``.
    """
    from .problems import MonkeySaddle

    problem = problem or MonkeySaddle()
    s = problem.feasible_set
    rng = np.random.default_rng(seed)
    pts = s.sample_points(rng, grid)
    if all(isinstance(leaf, Box) for leaf in s.leaves()):
        pts = np.vstack([pts, _box_vertices(s)])
    sampler = DirectionSampler(s, seed + 1)
    nx = problem.n_x
    worst = -np.inf
    for start in range(0, pts.shape[0], 256):
        P = pts[start:start + 256]
        E = sampler.sample_many(P.shape[0] * samples).reshape(P.shape[0], samples, -1)
        probes = (P[:, None, :] + tau * E).reshape(-1, s.dim)
        vals = problem.value(probes[:, :nx], probes[:, nx:]).reshape(P.shape[0], samples)
        mean = vals.mean(axis=1)
        se = vals.std(axis=1, ddof=1) / math.sqrt(samples)
        base = problem.value(P[:, :nx], P[:, nx:])
        worst = max(worst, float(np.max(np.abs(mean - base) - SLACK_SE * se)))
    bound = tau * problem.lipschitz_M + Delta
    return _report("smoothing_bias", bound, worst, pts.shape[0] * samples,
                   f"max over {pts.shape[0]} grid points of |mean - phi| - 3 se")


def _box_vertices(s: Product) -> np.ndarray:
    lo = np.concatenate([leaf.lower for leaf in s.leaves()])
    hi = np.concatenate([leaf.upper for leaf in s.leaves()])
    if lo.size > 12:
        return np.empty((0, lo.size))
    bits = (np.arange(2 ** lo.size)[:, None] >> np.arange(lo.size)) & 1
    return np.where(bits == 1, hi, lo)


def check_fourth_moment(problem: Optional[Callable] = None, samples: int = 200_000, n: int = 20,
                        L: float = 1.0, seed: int = 0) -> CheckReport:
    """``sqrt(E (g(e) - E g)^4)`` against ``3 L^2 / n`` for an ``L``-Lipschitz ``g`` on the sphere.

    The default ``g`` is ``L * max(<u, e>, 0)`` (a kinked Lipschitz function).
    """
    rng = np.random.default_rng(seed)
    if problem is None:
        u = sphere(rng, 1, n)[0]

        def problem(E):
            return L * np.maximum(E @ u, 0.0)

    E = sphere(rng, samples, n)
    v = problem(E)
    c4 = (v - v.mean()) ** 4
    m, se = c4.mean(), c4.std(ddof=1) / math.sqrt(samples)
    obs = math.sqrt(m)
    return _report(f"fourth_moment(n={n})", 3 * L * L / n, obs, samples, "c=3, slack 3 se (delta method)",
                   SLACK_SE * se / (2 * obs) if obs > 0 else 0.0)


# --------------------------------------------------------------------------
# geometry


def sphere_distance_formula(n: int, p: float, alpha: float, R: float) -> float:
    return alpha * R / n ** (1.0 / p - 0.5)


def brute_force_sphere_distance(n: int, p: float, alpha: float, R: float, starts: int = 100, seed: int = 0) -> float:
    """Smallest l_2 distance between the l_p spheres of radii ``(1 - alpha) R`` and ``R``.

    Both points live in the positive orthant (the configuration is symmetric
    under sign flips), parametrized as ``r * exp(s) / ||exp(s)||_p`` and
    minimized jointly with L-BFGS from ``starts`` random starts.
    """
    rng = np.random.default_rng(seed)
    r_in = (1 - alpha) * R

    def point(s, r):
        w = np.exp(s - s.max())
        return r * w / np.sum(w ** p) ** (1.0 / p)

    def obj(v):
        d = point(v[:n], r_in) - point(v[n:], R)
        return float(d @ d)

    best = np.inf
    for _ in range(starts):
        v0 = rng.normal(0.0, 2.0, 2 * n)
        res = minimize(obj, v0, method="L-BFGS-B", options={"ftol": 1e-16, "gtol": 1e-12, "maxiter": 2000})
        best = min(best, res.fun)
    return math.sqrt(max(best, 0.0))


def check_sphere_distance(n: int, p: float, alpha: float, R: float = 1.0, starts: int = 100,
                          tol: float = 1e-6, seed: int = 0) -> CheckReport:
    """Clearance formula against brute-force minimization; passes when they agree to ``tol``."""
    if not (1 <= p <= 2):
        raise ConfigurationError("the clearance formula covers 1 <= p <= 2")
    formula = sphere_distance_formula(n, p, alpha, R)
    brute = brute_force_sphere_distance(n, p, alpha, R, starts, seed)
    diff = abs(brute - formula)
    return CheckReport(f"sphere_distance(n={n},p={p:g},alpha={alpha:g})", tol, diff, starts,
                       diff <= tol, f"formula={formula:.9g} brute={brute:.9g}")


def check_squared_sum(m: int = 10, trials: int = 100_000, seed: int = 0) -> CheckReport:
    """``(sum a_i)^2 <= m sum a_i^2`` on random positive tuples; reports the worst ratio."""
    rng = np.random.default_rng(seed)
    A = rng.exponential(1.0, (trials, m)) ** rng.uniform(0.1, 3.0, (trials, 1))
    ratio = A.sum(axis=1) ** 2 / (m * np.sum(A * A, axis=1))
    return _report(f"squared_sum(m={m})", 1.0, float(ratio.max()), trials, "rounding slack 1e-12", 1e-12)


# --------------------------------------------------------------------------
# suite

SPHERE_COMBOS = [(n, p, a) for n in (2, 4) for p in (1.0, 1.5, 2.0) for a in (0.1, 0.2)]


def _suite():
    return {
        "aq_bound": lambda seed: [check_aq_bound(n, q, seed=seed) for n in (3, 10, 100) for q in (2.0, math.inf)],
        "second_moment": lambda seed: [check_second_moment(q=q, seed=seed) for q in (2.0, math.inf)],
        "smoothing_bias": lambda seed: [check_smoothing_bias(seed=seed)],
        "estimator_bias": lambda seed: [check_estimator_bias(q=q, seed=seed) for q in (2.0, math.inf)],
        "sphere_distance": lambda seed: [check_sphere_distance(n, p, a, seed=seed) for n, p, a in SPHERE_COMBOS],
        "squared_sum": lambda seed: [check_squared_sum(m, seed=seed) for m in (2, 10, 100)],
        "fourth_moment": lambda seed: [check_fourth_moment(n=n, seed=seed) for n in (5, 20, 100)],
    }


CHECK_NAMES = tuple(_suite())


def run_checks(names=None, seed: int = 0) -> list:
    """Run the named checks (all by default) and return their reports."""
    suite = _suite()
    names = list(names) if names else list(suite)
    unknown = [n for n in names if n not in suite]
    if unknown:
        raise ConfigurationError(f"unknown checks {unknown}; available: {', '.join(suite)}")
    reports = []
    for name in names:
        reports.extend(suite[name](seed))
    return reports


def write_reports_csv(path, reports) -> None:
    fields = ["check_name", "bound", "observed", "slack", "samples", "passed", "confidence_note"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        for r in reports:
            row = asdict(r)
            w.writerow({k: row[k] for k in fields})


def summary(reports) -> str:
    lines = [r.line() for r in reports]
    bad = sum(not r.passed for r in reports)
    lines.append(f"{len(reports) - bad}/{len(reports)} checks passed")
    return "\n".join(lines)
