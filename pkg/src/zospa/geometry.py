"""Bregman setups: prox-functions, divergences and mirror (prox) steps.

Two setups are supported:

* ``entropy`` (p = 1, q = inf) on simplexes, ``d(x) = sum x_i log x_i``;
  the divergence is the KL divergence and the prox step is the
  multiplicative-weights update.
* ``euclidean`` (p = q = 2) on any set, ``d(x) = ||x - c||^2 / 2`` with ``c``
  the set center; the prox step is a Euclidean projection.

Divergence convention: ``bregman_divergence(g, z, w)`` is
``d(z) - d(w) - <grad d(w), z - w>``, i.e. the divergence of ``z`` measured
from the anchor ``w``; for entropy this is ``KL(z || w)``.  The prox step from
``z`` solves ``argmin_u D(u, z) + <xi, u>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, DomainError, InvalidInputError
from .feasible_sets import FeasibleSet, Product, Simplex, default_geometry_kind

LOG_FLOOR = 1e-300


def lp_norm(v, p: float) -> float:
    """l_p norm for ``p`` in ``[1, inf]``."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("vector contains non-finite entries")
    if p < 1:
        raise InvalidInputError(f"p must be at least 1, got {p}")
    a = np.abs(v)
    if math.isinf(p):
        return float(a.max(initial=0.0))
    if p == 1:
        return float(a.sum())
    if p == 2:
        return float(np.sqrt(np.dot(a.ravel(), a.ravel())))
    return float(np.sum(a ** p) ** (1.0 / p))


def aq_squared(q: float, n: int) -> float:
    """Moment constant ``a_q^2`` with ``sqrt(E ||e||_q^4) <= a_q^2``.

    ``q = 2`` gives exactly 1 (unit sphere).  Otherwise
    ``min(2q - 1, 32 log n - 8) * n^(2/q - 1)``, stated for ``n >= 3``; smaller
    ``n`` falls back to the trivial bound 1 since ``||e||_q <= ||e||_2``.
    """
    if q == 2:
        return 1.0
    if n < 3:
        return 1.0
    c = 32.0 * math.log(n) - 8.0
    if not math.isinf(q):
        c = min(2.0 * q - 1.0, c)
    expo = -1.0 if math.isinf(q) else 2.0 / q - 1.0
    return c * n ** expo


@dataclass(frozen=True)
class Geometry:
    """A Bregman setup bound to a feasible set of dimension ``n``.

    ``diameter_sq`` is the squared Bregman diameter used by the step-size
    rule: ``2 log n_i`` per simplex block for entropy, the squared Euclidean
    diameter otherwise, summed over product blocks.
    """

    kind: str
    p: float
    q: float
    diameter_sq: float
    a_q_sq: float
    n: int

    def __post_init__(self):
        if self.kind not in ("entropy", "euclidean"):
            raise ConfigurationError(f"unknown geometry kind {self.kind!r}")
        if self.kind == "entropy" and not (self.p == 1 and math.isinf(self.q)):
            raise ConfigurationError("entropy geometry requires p = 1, q = inf")
        if self.kind == "euclidean" and not (self.p == 2 and self.q == 2):
            raise ConfigurationError("euclidean geometry requires p = q = 2")
        if self.kind == "euclidean" and self.a_q_sq != 1.0:
            raise ConfigurationError("euclidean geometry has a_q = 1")

    @property
    def omega(self) -> float:
        return math.sqrt(self.diameter_sq)

    @property
    def a_q(self) -> float:
        return math.sqrt(self.a_q_sq)


def _leaves(s: FeasibleSet):
    return s.leaves() if isinstance(s, Product) else [s]


def _euclidean_diameter_sq(leaf) -> float:
    if isinstance(leaf, Simplex):
        return 2.0 * leaf.mass ** 2 if leaf.n > 1 else 0.0
    if hasattr(leaf, "lower"):
        return float(np.sum((leaf.upper - leaf.lower) ** 2))
    # l_p balls with p <= 2 sit inside the l_2 ball of the same radius
    return (2.0 * leaf.radius) ** 2


def make_geometry(kind: str, s: FeasibleSet) -> Geometry:
    """Build the ``entropy`` or ``euclidean`` setup for ``s``."""
    leaves = _leaves(s)
    if kind == "entropy":
        if not all(isinstance(leaf, Simplex) for leaf in leaves):
            raise ConfigurationError("entropy geometry needs simplex blocks")
        diam = sum(2.0 * math.log(leaf.n) for leaf in leaves)
        return Geometry("entropy", 1.0, math.inf, diam, aq_squared(math.inf, s.dim), s.dim)
    if kind == "euclidean":
        diam = sum(_euclidean_diameter_sq(leaf) for leaf in leaves)
        return Geometry("euclidean", 2.0, 2.0, diam, 1.0, s.dim)
    raise ConfigurationError(f"unknown geometry kind {kind!r}")


def default_geometry(s: FeasibleSet) -> Geometry:
    return make_geometry(default_geometry_kind(s), s)


# --------------------------------------------------------------------------
# prox-function, divergence


def _check_pair(z, w):
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    if z.shape != w.shape:
        raise InvalidInputError(f"shape mismatch {z.shape} vs {w.shape}")
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(w))):
        raise InvalidInputError("non-finite entries")
    return z, w


def prox_function(g: Geometry, z, floor: float = 0.0, center=None) -> float:
    """Value of the prox-function ``d`` at ``z``."""
    z = np.asarray(z, dtype=float)
    if g.kind == "entropy":
        u = z - floor
        if np.any(u < 0):
            raise DomainError("entropy prox-function needs entries above the floor")
        pos = u > 0
        return float(np.sum(u[pos] * np.log(u[pos])))
    c = 0.0 if center is None else np.asarray(center, dtype=float)
    return 0.5 * float(np.sum((z - c) ** 2))


def prox_gradient(g: Geometry, z, floor: float = 0.0, center=None) -> np.ndarray:
    """Gradient of the prox-function (interior points for entropy)."""
    z = np.asarray(z, dtype=float)
    if g.kind == "entropy":
        u = z - floor
        if np.any(u <= 0):
            raise DomainError("entropy gradient needs points strictly above the floor")
        return np.log(u) + 1.0
    c = 0.0 if center is None else np.asarray(center, dtype=float)
    return z - c


def bregman_divergence(g: Geometry, z, w, floor: float = 0.0) -> float:
    """``d(z) - d(w) - <grad d(w), z - w>``.

    Entropy: ``sum (z_i - f) log((z_i - f)/(w_i - f))`` with ``f`` the simplex
    floor (0 for the probability simplex).  Euclidean: ``||z - w||^2 / 2``.
    """
    z, w = _check_pair(z, w)
    if g.kind == "euclidean":
        diff = z - w
        return 0.5 * float(np.dot(diff.ravel(), diff.ravel()))
    u = z - floor
    v = w - floor
    if np.any(u < 0) or np.any(v < 0):
        raise DomainError("entropy divergence needs points of the simplex")
    support = u > 0
    if np.any(v[support] <= 0):
        raise DomainError("KL divergence is infinite: anchor vanishes where the point does not")
    u_s = u[support]
    v_s = np.maximum(v[support], LOG_FLOOR)
    return float(np.sum(u_s * (np.log(u_s) - np.log(v_s))) - u.sum() + v.sum())


# --------------------------------------------------------------------------
# prox steps


def entropy_step_rows(z: np.ndarray, xi: np.ndarray, floor: float, mass: float) -> np.ndarray:
    """Row-wise multiplicative update on ``{x_i >= floor, sum x = 1}``."""
    u = np.maximum(z - floor, LOG_FLOOR)
    logits = np.log(u) - xi
    logits -= logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    w *= mass / w.sum(axis=-1, keepdims=True)
    return w + floor


def prox_step(g: Geometry, s: FeasibleSet, z, xi) -> np.ndarray:
    """Mirror step ``argmin_{u in s} D(u, z) + <xi, u>``.

    Works row-wise on stacks of points.  Products are handled blockwise.
    """
    z = np.asarray(z, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if z.shape != xi.shape or z.shape[-1:] != (s.dim,):
        raise InvalidInputError(f"shape mismatch: set dim {s.dim}, z {z.shape}, xi {xi.shape}")
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(xi))):
        raise InvalidInputError("non-finite entries")
    if isinstance(s, Product):
        a = prox_step(g, s.left, z[..., : s.split], xi[..., : s.split])
        b = prox_step(g, s.right, z[..., s.split:], xi[..., s.split:])
        return np.concatenate([a, b], axis=-1)
    if g.kind == "entropy":
        if not isinstance(s, Simplex):
            raise ConfigurationError("entropy prox steps are defined on simplexes only")
        return entropy_step_rows(z, xi, s.floor, s.mass)
    return s.project(z - xi)


@dataclass(frozen=True)
class BlockPoint:
    """A point ``z = (x, y)`` of a product space."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        y = np.asarray(self.y, dtype=float).ravel()
        if x.size == 0 or y.size == 0:
            raise InvalidInputError("both blocks must be nonempty")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InvalidInputError("non-finite entries")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n_x(self) -> int:
        return self.x.size

    @property
    def n_y(self) -> int:
        return self.y.size

    @property
    def n(self) -> int:
        return self.n_x + self.n_y

    def flat(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])

    @classmethod
    def from_flat(cls, z, n_x: int) -> "BlockPoint":
        z = np.asarray(z, dtype=float)
        return cls(z[:n_x], z[n_x:])


def block_prox_step(g: Geometry, s: Product, z: BlockPoint, xi: BlockPoint) -> BlockPoint:
    """Apply :func:`prox_step` to the x-block and the y-block independently."""
    if not isinstance(s, Product):
        raise ConfigurationError("block prox step needs a product set")
    if (z.n_x, z.n_y) != (s.left.dim, s.right.dim) or (xi.n_x, xi.n_y) != (z.n_x, z.n_y):
        raise InvalidInputError("block dimensions do not match the product set")
    return BlockPoint(prox_step(g, s.left, z.x, xi.x), prox_step(g, s.right, z.y, xi.y))
