"""Feasible sets, their shrunk versions, and probe-direction samplers.

Every set supports membership, Euclidean projection, support functions, and
the shrinkage machinery used when the oracle is defined only on the set:

* ``shrink(alpha)`` builds the reduced set,
* ``map_to_shrunk(alpha, x)`` sends a point of the full set into the reduced
  one,
* ``displacement_bound(alpha)`` bounds the l2 distance of that map,
* ``clearance(alpha)`` is the largest probe radius ``tau`` such that
  ``x + tau * e`` stays in the full set for every ``x`` in the reduced set
  and every direction ``e`` produced by :class:`DirectionSampler`.

Methods that accept points also accept stacks of points (one per row).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .exceptions import ConfigurationError, InvalidInputError

# slack for boundary values of alpha computed in floating point
_ALPHA_SLACK = 1e-12


def _as_points(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (dim,):
        raise InvalidInputError(f"expected trailing dimension {dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("point contains non-finite entries")
    return x


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 0 or not math.isfinite(alpha):
        raise ConfigurationError(f"shrink parameter must be positive, got {alpha}")
    return alpha


def dual_exponent(p: float) -> float:
    """Return q with 1/p + 1/q = 1 (p = 1 gives q = inf)."""
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class Simplex:
    """``{x : sum(x) = 1, x_i >= floor}``; ``floor = 0`` is the probability simplex.

    A positive floor is how shrunk simplexes are represented: the map
    ``x = floor + (1 - n * floor) * s`` identifies it with the standard
    simplex in ``s``.
    """

    n: int
    floor: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidInputError(f"simplex dimension must be a positive integer, got {self.n}")
        if self.floor < 0 or self.n * self.floor > 1 + _ALPHA_SLACK:
            raise ConfigurationError(f"floor {self.floor} leaves the simplex empty")

    @property
    def dim(self) -> int:
        return self.n

    @property
    def mass(self) -> float:
        """Total mass ``1 - n * floor`` carried above the floor."""
        return max(1.0 - self.n * self.floor, 0.0)

    def contains(self, x, tol: float = 0.0):
        x = _as_points(x, self.n)
        ok_sum = np.abs(x.sum(axis=-1) - 1.0) <= tol
        ok_low = np.all(x >= self.floor - tol, axis=-1)
        return ok_sum & ok_low

    def center(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n)

    def shrink(self, alpha: float) -> "Simplex":
        alpha = _check_alpha(alpha)
        if self.floor + alpha > 1.0 / (2 * self.n) + _ALPHA_SLACK:
            raise ConfigurationError(
                f"alpha={alpha} exceeds 1/(2n)={1.0 / (2 * self.n):.6g} for a {self.n}-simplex"
            )
        return Simplex(self.n, self.floor + alpha)

    def map_to_shrunk(self, alpha: float, x) -> np.ndarray:
        self._require_unfloored("map_to_shrunk")
        self.shrink(alpha)
        x = _as_points(x, self.n)
        if not np.all(self.contains(x, 1e-9)):
            raise InvalidInputError("point is not in the simplex")
        return (x + 2 * alpha) / (1 + 2 * alpha * self.n)

    def displacement_bound(self, alpha: float) -> float:
        self._require_unfloored("displacement_bound")
        return 2 * alpha * self.n

    def clearance(self, alpha: float) -> float:
        self._require_unfloored("clearance")
        return float(alpha)

    def table_alpha(self, eps: float, M: float, radius=None) -> float:
        return eps / (4 * self.n * M)

    def support(self, v) -> np.ndarray:
        v = _as_points(v, self.n)
        return self.floor * v.sum(axis=-1) + self.mass * v.max(axis=-1)

    def project(self, v) -> np.ndarray:
        """Euclidean projection (sort-based, row-wise)."""
        v = _as_points(v, self.n)
        u = (v - self.floor) / self.mass if self.mass > 0 else v
        flat = np.atleast_2d(u)
        srt = -np.sort(-flat, axis=1)
        css = np.cumsum(srt, axis=1) - 1.0
        idx = np.arange(1, self.n + 1)
        cond = srt - css / idx > 0
        rho = self.n - 1 - np.argmax(cond[:, ::-1], axis=1)
        theta = css[np.arange(flat.shape[0]), rho] / (rho + 1)
        out = np.maximum(flat - theta[:, None], 0.0)
        out = self.floor + self.mass * out
        return out.reshape(v.shape)

    def sample_points(self, rng: np.random.Generator, k: int) -> np.ndarray:
        s = rng.dirichlet(np.ones(self.n), size=k)
        return self.floor + self.mass * s

    def vertices(self) -> np.ndarray:
        return self.floor + self.mass * np.eye(self.n)

    def _require_unfloored(self, what: str):
        if self.floor != 0:
            raise ConfigurationError(f"{what} is defined relative to the unshrunk simplex")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``{l_i <= x_i <= u_i}``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).ravel()
        hi = np.asarray(self.upper, dtype=float).ravel()
        if lo.shape != hi.shape or lo.size == 0:
            raise InvalidInputError("box bounds must be nonempty vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidInputError("box bounds must be finite")
        if np.any(lo > hi):
            raise InvalidInputError("box requires lower <= upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, n: int, lo: float, hi: float) -> "Box":
        return cls(np.full(n, float(lo)), np.full(n, float(hi)))

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, x, tol: float = 0.0):
        x = _as_points(x, self.dim)
        return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)

    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def shrink(self, alpha: float) -> "Box":
        alpha = _check_alpha(alpha)
        if 2 * alpha > np.min(self.upper - self.lower) + _ALPHA_SLACK:
            raise ConfigurationError(f"alpha={alpha} empties the box")
        lo = self.lower + alpha
        hi = np.maximum(self.upper - alpha, lo)
        return Box(lo, hi)

    def map_to_shrunk(self, alpha: float, x) -> np.ndarray:
        inner = self.shrink(alpha)
        x = _as_points(x, self.dim)
        if not np.all(self.contains(x, 1e-9)):
            raise InvalidInputError("point is not in the box")
        return np.clip(x, inner.lower, inner.upper)

    def displacement_bound(self, alpha: float) -> float:
        return alpha * math.sqrt(self.dim)

    def clearance(self, alpha: float) -> float:
        return float(alpha)

    def table_alpha(self, eps: float, M: float, radius=None) -> float:
        return eps / (2 * math.sqrt(self.dim) * M)

    def support(self, v) -> np.ndarray:
        v = _as_points(v, self.dim)
        return np.maximum(v * self.lower, v * self.upper).sum(axis=-1)

    def project(self, v) -> np.ndarray:
        return np.clip(_as_points(v, self.dim), self.lower, self.upper)

    def sample_points(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(k, self.dim))

    def vertices(self) -> np.ndarray:
        if self.dim > 12:
            raise ConfigurationError("vertex enumeration is limited to 12 dimensions")
        bits = (np.arange(2 ** self.dim)[:, None] >> np.arange(self.dim)) & 1
        return np.where(bits == 1, self.upper, self.lower)

    def __eq__(self, other):
        return (
            isinstance(other, Box)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))


@dataclass(frozen=True)
class LpBall:
    """``{x : ||x - center||_p <= radius}`` with ``p`` in ``[1, 2]``."""

    center_point: np.ndarray
    radius: float
    p: float = 2.0

    def __post_init__(self):
        c = np.asarray(self.center_point, dtype=float).ravel()
        if c.size == 0 or not np.all(np.isfinite(c)):
            raise InvalidInputError("ball center must be a nonempty finite vector")
        if not self.radius > 0:
            raise InvalidInputError(f"ball radius must be positive, got {self.radius}")
        if not 1 <= self.p <= 2:
            raise InvalidInputError(f"ball exponent must lie in [1, 2], got {self.p}")
        object.__setattr__(self, "center_point", c)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "p", float(self.p))

    @property
    def dim(self) -> int:
        return self.center_point.size

    @property
    def q(self) -> float:
        return dual_exponent(self.p)

    def norm(self, v) -> np.ndarray:
        return np.sum(np.abs(v) ** self.p, axis=-1) ** (1.0 / self.p)

    def contains(self, x, tol: float = 0.0):
        x = _as_points(x, self.dim)
        return self.norm(x - self.center_point) <= self.radius + tol

    def center(self) -> np.ndarray:
        return self.center_point.copy()

    def shrink(self, alpha: float) -> "LpBall":
        alpha = _check_alpha(alpha)
        if alpha >= 1:
            raise ConfigurationError(f"alpha={alpha} must be below 1 for a ball")
        return LpBall(self.center_point, self.radius * (1 - alpha), self.p)

    def map_to_shrunk(self, alpha: float, x) -> np.ndarray:
        self.shrink(alpha)
        x = _as_points(x, self.dim)
        if not np.all(self.contains(x, 1e-9)):
            raise InvalidInputError("point is not in the ball")
        return self.center_point + (1 - alpha) * (x - self.center_point)

    def displacement_bound(self, alpha: float) -> float:
        return alpha * self.dim ** (1.0 / self.q) * self.radius

    def clearance(self, alpha: float) -> float:
        return alpha * self.radius / self.dim ** (1.0 / self.p - 0.5)

    def table_alpha(self, eps: float, M: float, radius=None) -> float:
        R = self.radius if radius is None else float(radius)
        if not R > 0:
            raise ConfigurationError("ball alpha needs a positive radius")
        return eps / (2 * self.dim ** (1.0 / self.q) * R * M)

    def support(self, v) -> np.ndarray:
        v = _as_points(v, self.dim)
        q = self.q
        dual = np.max(np.abs(v), axis=-1) if math.isinf(q) else np.sum(np.abs(v) ** q, axis=-1) ** (1 / q)
        return v @ self.center_point + self.radius * dual

    def project(self, v, tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
        v = _as_points(v, self.dim)
        rows = np.atleast_2d(v - self.center_point)
        out = np.array([_project_lp_ball(r, self.radius, self.p, tol, max_iter) for r in rows])
        return (out + self.center_point).reshape(v.shape)

    def sample_points(self, rng: np.random.Generator, k: int) -> np.ndarray:
        g = rng.standard_normal((k, self.dim))
        g /= self.norm(g)[:, None]
        r = self.radius * rng.uniform(size=(k, 1)) ** (1.0 / self.dim)
        return self.center_point + r * g

    def __eq__(self, other):
        return (
            isinstance(other, LpBall)
            and np.array_equal(self.center_point, other.center_point)
            and self.radius == other.radius
            and self.p == other.p
        )

    def __hash__(self):
        return hash((self.center_point.tobytes(), self.radius, self.p))


def _project_lp_ball(v: np.ndarray, R: float, p: float, tol: float, max_iter: int) -> np.ndarray:
    """Project ``v`` onto ``{||u||_p <= R}`` (centered at the origin)."""
    a = np.abs(v)
    if np.sum(a ** p) ** (1 / p) <= R:
        return v.copy()
    if p == 2:
        return v * (R / np.linalg.norm(v))
    if p == 1:
        srt = np.sort(a)[::-1]
        css = np.cumsum(srt) - R
        idx = np.arange(1, a.size + 1)
        rho = np.nonzero(srt - css / idx > 0)[0][-1]
        theta = css[rho] / (rho + 1)
        return np.sign(v) * np.maximum(a - theta, 0.0)

    # KKT: t_i + lam * p * t_i^(p-1) = a_i, with lam chosen so that ||t||_p = R.
    def coords(lam):
        lo = np.zeros_like(a)
        hi = a.copy()
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            too_big = mid + lam * p * mid ** (p - 1) > a
            hi = np.where(too_big, mid, hi)
            lo = np.where(too_big, lo, mid)
        return 0.5 * (lo + hi)

    lam_lo, lam_hi = 0.0, 1.0
    while np.sum(coords(lam_hi) ** p) ** (1 / p) > R:
        lam_hi *= 2.0
    t = coords(lam_hi)
    for _ in range(max_iter):
        lam = 0.5 * (lam_lo + lam_hi)
        t = coords(lam)
        if np.sum(t ** p) ** (1 / p) > R:
            lam_lo = lam
        else:
            lam_hi = lam
        if lam_hi - lam_lo <= tol * max(1.0, lam_hi):
            break
    t = coords(lam_hi)
    return np.sign(v) * t


@dataclass(frozen=True)
class Product:
    """Cartesian product ``left x right``; nests to any depth."""

    left: "FeasibleSet"
    right: "FeasibleSet"

    @property
    def dim(self) -> int:
        return self.left.dim + self.right.dim

    @property
    def split(self) -> int:
        return self.left.dim

    def parts(self, z):
        z = np.asarray(z, dtype=float)
        return z[..., : self.split], z[..., self.split:]

    def leaves(self) -> list:
        out = []
        for child in (self.left, self.right):
            out.extend(child.leaves() if isinstance(child, Product) else [child])
        return out

    def contains(self, z, tol: float = 0.0):
        z = _as_points(z, self.dim)
        a, b = self.parts(z)
        return self.left.contains(a, tol) & self.right.contains(b, tol)

    def center(self) -> np.ndarray:
        return np.concatenate([self.left.center(), self.right.center()])

    def shrink(self, alpha: float) -> "Product":
        return Product(self.left.shrink(alpha), self.right.shrink(alpha))

    def map_to_shrunk(self, alpha: float, z) -> np.ndarray:
        a, b = self.parts(_as_points(z, self.dim))
        return np.concatenate(
            [self.left.map_to_shrunk(alpha, a), self.right.map_to_shrunk(alpha, b)], axis=-1
        )

    def displacement_bound(self, alpha: float) -> float:
        return self.left.displacement_bound(alpha) + self.right.displacement_bound(alpha)

    def clearance(self, alpha: float) -> float:
        return min(self.left.clearance(alpha), self.right.clearance(alpha))

    def support(self, v) -> np.ndarray:
        a, b = self.parts(_as_points(v, self.dim))
        return self.left.support(a) + self.right.support(b)

    def project(self, v) -> np.ndarray:
        a, b = self.parts(_as_points(v, self.dim))
        return np.concatenate([self.left.project(a), self.right.project(b)], axis=-1)

    def sample_points(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return np.concatenate(
            [self.left.sample_points(rng, k), self.right.sample_points(rng, k)], axis=1
        )


FeasibleSet = Union[Simplex, Box, LpBall, Product]


def contains(s: FeasibleSet, x, tol: float = 0.0) -> bool:
    """Membership test for a single point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != s.dim:
        raise InvalidInputError(f"expected a vector of length {s.dim}, got shape {x.shape}")
    return bool(s.contains(x, tol))


# --------------------------------------------------------------------------
# shrink plans


@dataclass(frozen=True)
class ShrinkPlan:
    alpha: float
    tau_max: float
    r_bound: float


def resolve_shrink_plan(s: FeasibleSet, eps: float, M: float, R_opt=None) -> ShrinkPlan:
    """Pick the reduced-set parameter for target accuracy ``eps``.

    Leaves use ``alpha = eps/(4nM)`` (simplex), ``eps/(2 sqrt(n) M)`` (box) and
    ``eps/(2 n^(1/q) R M)`` (ball).  A product halves the smaller child alpha
    and scales the clearance accordingly.
    """
    if not (eps > 0 and M > 0):
        raise ConfigurationError("eps and M must be positive")
    if isinstance(s, Product):
        left = resolve_shrink_plan(s.left, eps, M, R_opt)
        right = resolve_shrink_plan(s.right, eps, M, R_opt)
        a_min = min(left.alpha, right.alpha)
        alpha = a_min / 2
        tau = a_min * min(left.tau_max / left.alpha, right.tau_max / right.alpha) / 2
        return ShrinkPlan(alpha, tau, s.displacement_bound(alpha))
    alpha = s.table_alpha(eps, M, R_opt) if isinstance(s, LpBall) else s.table_alpha(eps, M)
    return ShrinkPlan(alpha, s.clearance(alpha), s.displacement_bound(alpha))


# --------------------------------------------------------------------------
# direction sampling


def hyperplane_basis(n: int) -> np.ndarray:
    """Rows ``v_k = (1,...,1,-k,0,...,0)/sqrt(k+k^2)``, k = 1..n-1."""
    V = np.zeros((n - 1, n))
    for k in range(1, n):
        V[k - 1, :k] = 1.0
        V[k - 1, k] = -k
        V[k - 1] /= math.sqrt(k + k * k)
    return V


def _expand_hyperplane(coef: np.ndarray) -> np.ndarray:
    """Compute ``coef @ hyperplane_basis(n)`` in O(n) per row."""
    m = coef.shape[-1]
    k = np.arange(1, m + 1)
    c = coef / np.sqrt(k + k * k)
    out = np.zeros(coef.shape[:-1] + (m + 1,))
    # entry j (0-based) collects +c_k for every k > j and -j * c_j
    tail = np.cumsum(c[..., ::-1], axis=-1)[..., ::-1]
    out[..., :m] = tail
    out[..., 1:] -= k * c
    return out


def _intrinsic_dim(leaf) -> int:
    return leaf.dim - 1 if isinstance(leaf, Simplex) else leaf.dim


@dataclass
class DirectionSampler:
    """Unit probe directions adapted to a feasible set.

    * ``full_sphere``: uniform on the Euclidean unit sphere of ``R^n``.
    * ``simplex_hyperplane``: uniform on the unit sphere of the zero-sum
      hyperplane, expanded in the orthonormal basis of
      :func:`hyperplane_basis`.
    * ``product_concat``: one uniform draw over the concatenated intrinsic
      coordinates of all leaves, split into blocks and expanded per leaf, so
      the whole vector has unit norm and each block has norm at most one.
    """

    feasible_set: FeasibleSet
    seed: object = None
    chunk: int = 256
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.rng = self.seed if isinstance(self.seed, np.random.Generator) else np.random.default_rng(self.seed)
        s = self.feasible_set
        self._leaves = s.leaves() if isinstance(s, Product) else [s]
        self._intrinsic = [_intrinsic_dim(leaf) for leaf in self._leaves]
        self._buffer = np.empty((0, s.dim))
        self._pos = 0

    @property
    def mode(self) -> str:
        if isinstance(self.feasible_set, Product):
            return "product_concat"
        if isinstance(self.feasible_set, Simplex):
            return "simplex_hyperplane"
        return "full_sphere"

    @property
    def dim(self) -> int:
        return self.feasible_set.dim

    def sample_many(self, k: int) -> np.ndarray:
        total = sum(self._intrinsic)
        g = self.rng.standard_normal((k, total))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        blocks, start = [], 0
        for leaf, m in zip(self._leaves, self._intrinsic):
            part = g[:, start:start + m]
            start += m
            blocks.append(_expand_hyperplane(part) if isinstance(leaf, Simplex) else part)
        return np.concatenate(blocks, axis=1)

    def sample(self) -> np.ndarray:
        if self._pos >= self._buffer.shape[0]:
            self._buffer = self.sample_many(self.chunk)
            self._pos = 0
        e = self._buffer[self._pos]
        self._pos += 1
        return e.copy()


def sample_direction(sampler: DirectionSampler) -> np.ndarray:
    return sampler.sample()


def default_geometry_kind(s: FeasibleSet) -> str:
    """``entropy`` when every leaf is a simplex, else ``euclidean``."""
    leaves = s.leaves() if isinstance(s, Product) else [s]
    return "entropy" if all(isinstance(leaf, Simplex) for leaf in leaves) else "euclidean"
