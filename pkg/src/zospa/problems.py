"""Benchmark saddle-point problems.

Every problem exposes the same duck-typed surface:

``value(x, y)``
    function value; ``x`` and ``y`` may be stacks of points (one per row).
``gradient(x, y)``
    the pair ``(grad_x, grad_y)``, row-wise as well.
``feasible_set``
    the natural compact set ``X x Y`` as a :class:`~zospa.sets.Product`.
``lipschitz_M``
    a bound on ``||grad phi||_2`` over ``feasible_set``.
``gradient_bound(q)``
    a bound on ``||(grad_x, grad_y)||_q`` over ``feasible_set``.
``saddle_gap(x, y, set_x, set_y)``
    ``max_{y' in Y} phi(x, y') - min_{x' in X} phi(x', y)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .exceptions import InvalidInputError
from .feasible_sets import Box, Product, Simplex

BOX_HALF_WIDTH = 10.0


def _rows(a, dim: int, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape[-1:] != (dim,):
        raise InvalidInputError(f"{name} must have trailing dimension {dim}, got {a.shape}")
    return a


def _interval_distance(t, lo, hi):
    return np.maximum(lo - t, 0.0) + np.maximum(t - hi, 0.0)


# --------------------------------------------------------------------------
# matrix games


@dataclass(frozen=True)
class MatrixGame:
    """``min_{x in simplex_n} max_{y in simplex_k} y^T C x`` for a ``k x n`` matrix."""

    C: np.ndarray
    generator_spec: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        C = np.array(self.C, dtype=float)
        if C.ndim != 2 or min(C.shape) < 1 or not np.all(np.isfinite(C)):
            raise InvalidInputError("payoff matrix must be a finite 2-d array")
        C.setflags(write=False)
        object.__setattr__(self, "C", C)

    @property
    def n_x(self) -> int:
        return self.C.shape[1]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    @property
    def feasible_set(self) -> Product:
        return Product(Simplex(self.n_x), Simplex(self.n_y))

    def value(self, x, y):
        x = _rows(x, self.n_x, "x")
        y = _rows(y, self.n_y, "y")
        return np.einsum("...k,...k->...", y, x @ self.C.T)

    def gradient(self, x, y):
        x = _rows(x, self.n_x, "x")
        y = _rows(y, self.n_y, "y")
        return y @ self.C, x @ self.C.T

    @property
    def lipschitz_M(self) -> float:
        # C^T y and C x are convex combinations of rows / columns of C
        row = np.max(np.sum(self.C ** 2, axis=1))
        col = np.max(np.sum(self.C ** 2, axis=0))
        return float(math.sqrt(row + col))

    def gradient_bound(self, q: float) -> float:
        if q == 2:
            return self.lipschitz_M
        return float(np.max(np.abs(self.C)))

    def saddle_gap(self, x, y, set_x=None, set_y=None):
        set_x = set_x or Simplex(self.n_x)
        set_y = set_y or Simplex(self.n_y)
        x = _rows(x, self.n_x, "x")
        y = _rows(y, self.n_y, "y")
        return set_y.support(x @ self.C.T) + set_x.support(-(y @ self.C))


def generate_section4_matrix(n: int, k: int, seed: int) -> MatrixGame:
    """Random game with a planted saddle point.

    Entries are uniform on [0, 1]; one random row is redrawn uniform on
    [5, 10] and one entry of that row uniform on [1, 5].  ``n`` is the number
    of columns (minimizing player), ``k`` the number of rows.
    """
    if n < 2 or k < 2:
        raise InvalidInputError("game needs at least two strategies per player")
    rng = np.random.default_rng(seed)
    C = rng.uniform(0.0, 1.0, size=(k, n))
    row = int(rng.integers(k))
    col = int(rng.integers(n))
    C[row] = rng.uniform(5.0, 10.0, size=n)
    C[row, col] = rng.uniform(1.0, 5.0)
    spec = {
        "seed": int(seed),
        "base_range": [0.0, 1.0],
        "boosted_row_range": [5.0, 10.0],
        "saddle_range": [1.0, 5.0],
        "boosted_row": row,
        "saddle_col": col,
    }
    return MatrixGame(C, spec)


def resize_saddle(game: MatrixGame, row_factor: float, saddle_factor: float, row_offset: float = 0.0) -> MatrixGame:
    """Rescale the planted row without regenerating the matrix.

    The boosted row is multiplied by ``row_factor`` except for the saddle
    entry, which is multiplied by ``saddle_factor``; ``row_offset`` is then
    added to every entry of the row.  ``(4, 2)`` and ``(25, 5)`` enlarge the
    saddle, ``(0.5, 0.5, 0.5)`` halves the row and adds one half.
    """
    spec = dict(game.generator_spec)
    if "boosted_row" not in spec:
        raise InvalidInputError("game was not produced by generate_section4_matrix")
    row, col = spec["boosted_row"], spec["saddle_col"]
    C = game.C.copy()
    saddle = C[row, col] * saddle_factor
    C[row] *= row_factor
    C[row, col] = saddle
    C[row] += row_offset
    spec.update(row_factor=row_factor, saddle_factor=saddle_factor, row_offset=row_offset)
    return MatrixGame(C, spec)


def _support_enumeration(C: np.ndarray, tol: float = 1e-12):
    """Min-player strategy and value of ``min_x max_i (Cx)_i`` by vertex enumeration."""
    k, n = C.shape
    best_v, best_x = math.inf, None
    for size in range(1, min(k, n) + 1):
        for cols in itertools.combinations(range(n), size):
            for rows in itertools.combinations(range(k), size):
                # (C x)_i = v on rows, sum x = 1 on cols
                A = np.zeros((size + 1, size + 1))
                A[:size, :size] = C[np.ix_(rows, cols)]
                A[:size, size] = -1.0
                A[size, :size] = 1.0
                rhs = np.zeros(size + 1)
                rhs[size] = 1.0
                try:
                    sol = np.linalg.solve(A, rhs)
                except np.linalg.LinAlgError:
                    continue
                xs, v = sol[:size], sol[size]
                if np.any(xs < -tol):
                    continue
                x = np.zeros(n)
                x[list(cols)] = np.maximum(xs, 0.0)
                x /= x.sum()
                worst = float(np.max(C @ x))
                if worst < best_v - tol:
                    best_v, best_x = worst, x
    return best_v, best_x


def _lp_strategy(C: np.ndarray):
    """``min_x max_i (Cx)_i`` over the simplex as a linear program."""
    k, n = C.shape
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.hstack([C, -np.ones((k, 1))])
    A_eq = np.zeros((1, n + 1))
    A_eq[0, :n] = 1.0
    bounds = [(0, None)] * n + [(None, None)]
    res = optimize.linprog(c, A_ub=A_ub, b_ub=np.zeros(k), A_eq=A_eq, b_eq=[1.0],
                           bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"LP solver failed: {res.message}")
    x = np.maximum(res.x[:n], 0.0)
    return float(res.x[-1]), x / x.sum()


def matrix_game_value(C, method: str = "auto"):
    """Value and optimal strategies ``(value, x_star, y_star)`` of ``y^T C x``.

    ``x`` minimizes over columns, ``y`` maximizes over rows.  Games with at
    most three strategies per player are solved exactly by enumerating
    square supports; larger ones by linear programming.
    """
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or not np.all(np.isfinite(C)):
        raise InvalidInputError("payoff matrix must be a finite 2-d array")
    if method == "auto":
        method = "enumerate" if max(C.shape) <= 3 else "lp"
    if method == "enumerate":
        v_min, x = _support_enumeration(C)
        v_max, y = _support_enumeration(-C.T)
        v_max = -v_max
    elif method == "lp":
        v_min, x = _lp_strategy(C)
        v_max, y = _lp_strategy(-C.T)
        v_max = -v_max
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    return 0.5 * (v_min + v_max), x, y


def save_matrix_csv(path, C) -> None:
    """Write ``C`` row-major with a ``rows,cols`` header line."""
    C = np.asarray(C, dtype=float)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"rows={C.shape[0]},cols={C.shape[1]}\n")
        for row in C:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        try:
            dims = dict(part.split("=") for part in header.split(","))
            k, n = int(dims["rows"]), int(dims["cols"])
        except (ValueError, KeyError) as exc:
            raise InvalidInputError(f"bad matrix header {header!r}") from exc
        data = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    C = np.array(data, dtype=float)
    if C.shape != (k, n):
        raise InvalidInputError(f"header says {k}x{n} but file holds {C.shape}")
    return C


# --------------------------------------------------------------------------
# smooth test problems, boxed to make the feasible set compact


def _default_box(n: int, half_width: float = BOX_HALF_WIDTH) -> Box:
    return Box.cube(n, -half_width, half_width)


@dataclass(frozen=True)
class MonkeySaddle:
    """``(x - 1)^3 - 3 (x - 1)(y - 1)^2`` on ``[-10, 10]^2``.

    Not convex-concave; kept as a stress case.  Stationary at ``(1, 1)``.
    """

    half_width: float = BOX_HALF_WIDTH
    n_x: int = 1
    n_y: int = 1

    @property
    def feasible_set(self) -> Product:
        return Product(_default_box(1, self.half_width), _default_box(1, self.half_width))

    def value(self, x, y):
        u = _rows(x, 1, "x")[..., 0] - 1.0
        v = _rows(y, 1, "y")[..., 0] - 1.0
        return u ** 3 - 3.0 * u * v ** 2

    def gradient(self, x, y):
        u = _rows(x, 1, "x") - 1.0
        v = _rows(y, 1, "y") - 1.0
        return 3.0 * u ** 2 - 3.0 * v ** 2, -6.0 * u * v

    @property
    def lipschitz_M(self) -> float:
        r = self.half_width + 1.0
        return float(math.hypot(3 * r * r, 6 * r * r))

    def gradient_bound(self, q: float) -> float:
        return self.lipschitz_M

    def saddle_gap(self, x, y, set_x=None, set_y=None):
        set_x = set_x or _default_box(1, self.half_width)
        set_y = set_y or _default_box(1, self.half_width)
        u = np.atleast_1d(_rows(x, 1, "x")[..., 0]) - 1.0
        v = np.atleast_1d(_rows(y, 1, "y")[..., 0]) - 1.0
        ly, hy = set_y.lower[0] - 1.0, set_y.upper[0] - 1.0
        lx, hx = set_x.lower[0] - 1.0, set_x.upper[0] - 1.0
        # max over y: -3u * v'^2 on [ly, hy]; candidates endpoints and 0
        vs = np.array([ly, hy, np.clip(0.0, ly, hy)])
        best_y = np.max(u[:, None] ** 3 - 3.0 * u[:, None] * vs[None, :] ** 2, axis=1)
        # min over x: u'^3 - 3 c u' with c = v^2; candidates endpoints and +-sqrt(c)
        c = v ** 2
        root = np.sqrt(c)
        cand = np.stack([np.full_like(c, lx), np.full_like(c, hx),
                         np.clip(root, lx, hx), np.clip(-root, lx, hx)], axis=1)
        worst_x = np.min(cand ** 3 - 3.0 * c[:, None] * cand, axis=1)
        gap = best_y - worst_x
        return gap if np.ndim(x) > 1 else gap[0]


@dataclass(frozen=True)
class SeparableQuadratic:
    """``<a, x - b>^2 - <c, y - d>^2`` on ``[-10, 10]^n x [-10, 10]^n``."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    half_width: float = BOX_HALF_WIDTH

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        if not (self.a.size == self.b.size and self.c.size == self.d.size):
            raise InvalidInputError("a/b and c/d must have matching lengths")

    @classmethod
    def random(cls, n: int, seed: int) -> "SeparableQuadratic":
        rng = np.random.default_rng(seed)
        a, b, c, d = rng.uniform(0.0, 1.0, size=(4, n))
        return cls(a, b, c, d)

    @property
    def n_x(self) -> int:
        return self.a.size

    @property
    def n_y(self) -> int:
        return self.c.size

    @property
    def feasible_set(self) -> Product:
        return Product(_default_box(self.n_x, self.half_width), _default_box(self.n_y, self.half_width))

    def value(self, x, y):
        x = _rows(x, self.n_x, "x")
        y = _rows(y, self.n_y, "y")
        return ((x - self.b) @ self.a) ** 2 - ((y - self.d) @ self.c) ** 2

    def gradient(self, x, y):
        x = _rows(x, self.n_x, "x")
        y = _rows(y, self.n_y, "y")
        sx = (x - self.b) @ self.a
        sy = (y - self.d) @ self.c
        return 2.0 * sx[..., None] * self.a, -2.0 * sy[..., None] * self.c

    @property
    def lipschitz_M(self) -> float:
        S = self.feasible_set
        reach_x = max(abs(S.left.support(self.a) - self.a @ self.b), abs(S.left.support(-self.a) + self.a @ self.b))
        reach_y = max(abs(S.right.support(self.c) - self.c @ self.d), abs(S.right.support(-self.c) + self.c @ self.d))
        gx = 2 * reach_x * np.linalg.norm(self.a)
        gy = 2 * reach_y * np.linalg.norm(self.c)
        return float(math.hypot(gx, gy))

    def gradient_bound(self, q: float) -> float:
        return self.lipschitz_M

    def saddle_gap(self, x, y, set_x=None, set_y=None):
        set_x = set_x or self.feasible_set.left
        set_y = set_y or self.feasible_set.right
        x = _rows(x, self.n_x, "x")
        y = _rows(y, self.n_y, "y")
        # <c, y'> ranges over [-support(-c), support(c)]
        tc = self.c @ self.d
        dy = _interval_distance(tc, -set_y.support(-self.c), set_y.support(self.c))
        ta = self.a @ self.b
        dx = _interval_distance(ta, -set_x.support(-self.a), set_x.support(self.a))
        best_y = ((x - self.b) @ self.a) ** 2 - dy ** 2
        worst_x = dx ** 2 - ((y - self.d) @ self.c) ** 2
        return best_y - worst_x


@dataclass(frozen=True)
class LagrangianQP:
    """Lagrangian ``x^T A x / 2 - b^T x + y^T (C x - d)`` of an equality-constrained QP.

    ``x`` lives in ``[-R_x, R_x]^n`` and the multiplier ``y`` in
    ``[-R_y, R_y]^k``; both radii come from the KKT solution (ten times its
    largest entry, at least 10 for ``x``).
    """

    A: np.ndarray
    b: np.ndarray
    C: np.ndarray
    d: np.ndarray
    radius_x: float = 0.0
    radius_y: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        C = np.asarray(self.C, dtype=float)
        b = np.asarray(self.b, dtype=float).ravel()
        d = np.asarray(self.d, dtype=float).ravel()
        n = A.shape[0]
        if A.shape != (n, n) or C.shape[1:] != (n,) or b.size != n or d.size != C.shape[0]:
            raise InvalidInputError("inconsistent QP dimensions")
        if not np.allclose(A, A.T, atol=1e-12 * max(1.0, np.abs(A).max())):
            raise InvalidInputError("A must be symmetric")
        for name, val in (("A", A), ("b", b), ("C", C), ("d", d)):
            object.__setattr__(self, name, val)
        if self.radius_x <= 0 or self.radius_y <= 0:
            xs, ys = self.kkt_point()
            if self.radius_x <= 0:
                object.__setattr__(self, "radius_x", max(BOX_HALF_WIDTH, 10.0 * float(np.max(np.abs(xs)))))
            if self.radius_y <= 0:
                object.__setattr__(self, "radius_y", max(1.0, 10.0 * float(np.max(np.abs(ys)))))

    @classmethod
    def random(cls, n: int, k: int, seed: int, semidefinite: bool = False) -> "LagrangianQP":
        """``A = Q^T D Q`` with random positive eigenvalues and a random orthogonal ``Q``.

        With ``semidefinite=True`` half of the eigenvalues are set to zero.
        """
        rng = np.random.default_rng(seed)
        eig = rng.uniform(0.1, 1.0, size=n)
        if semidefinite:
            eig[: n // 2] = 0.0
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        A = Q.T @ np.diag(eig) @ Q
        A = 0.5 * (A + A.T)
        C = rng.standard_normal((k, n)) / math.sqrt(n)
        b = rng.standard_normal(n)
        d = rng.standard_normal(k)
        return cls(A, b, C, d)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]

    @property
    def feasible_set(self) -> Product:
        return Product(Box.cube(self.n_x, -self.radius_x, self.radius_x),
                       Box.cube(self.n_y, -self.radius_y, self.radius_y))

    def kkt_point(self):
        """Solve ``[A C^T; C 0] [x; y] = [b; d]`` (least squares if singular)."""
        n, k = self.n_x, self.n_y
        K = np.block([[self.A, self.C.T], [self.C, np.zeros((k, k))]])
        rhs = np.concatenate([self.b, self.d])
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        return sol[:n], sol[n:]

    def value(self, x, y):
        x = _rows(x, self.n_x, "x")
        y = _rows(y, self.n_y, "y")
        quad = 0.5 * np.einsum("...i,...i->...", x @ self.A, x)
        return quad - x @ self.b + np.einsum("...k,...k->...", y, x @ self.C.T - self.d)

    def gradient(self, x, y):
        x = _rows(x, self.n_x, "x")
        y = _rows(y, self.n_y, "y")
        return x @ self.A - self.b + y @ self.C, x @ self.C.T - self.d

    @property
    def lipschitz_M(self) -> float:
        rx = self.radius_x * math.sqrt(self.n_x)
        ry = self.radius_y * math.sqrt(self.n_y)
        nA = np.linalg.norm(self.A, 2)
        nC = np.linalg.norm(self.C, 2)
        gx = nA * rx + np.linalg.norm(self.b) + nC * ry
        gy = nC * rx + np.linalg.norm(self.d)
        return float(math.hypot(gx, gy))

    def gradient_bound(self, q: float) -> float:
        return self.lipschitz_M

    def _min_over_box(self, lin: np.ndarray, box: Box) -> float:
        """``min_{x in box} x^T A x / 2 - lin^T x`` by L-BFGS-B from two starts."""

        def fun(x):
            Ax = self.A @ x
            return 0.5 * x @ Ax - lin @ x, Ax - lin

        bounds = list(zip(box.lower, box.upper))
        best = math.inf
        for x0 in (box.center(), box.project(np.linalg.lstsq(self.A, lin, rcond=None)[0])):
            res = optimize.minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                                    options={"ftol": 1e-15, "gtol": 1e-10, "maxiter": 20000})
            best = min(best, float(res.fun))
        return best

    def saddle_gap(self, x, y, set_x=None, set_y=None):
        set_x = set_x or self.feasible_set.left
        set_y = set_y or self.feasible_set.right
        x = _rows(x, self.n_x, "x")
        y = _rows(y, self.n_y, "y")
        X = np.atleast_2d(x)
        Y = np.atleast_2d(y)
        out = []
        for xr, yr in zip(X, Y):
            best_y = 0.5 * xr @ self.A @ xr - self.b @ xr + set_y.support(self.C @ xr - self.d)
            worst_x = self._min_over_box(self.b - self.C.T @ yr, set_x) - yr @ self.d
            out.append(best_y - worst_x)
        out = np.asarray(out)
        return out if x.ndim > 1 else out[0]


def finite_difference_gradient(problem, x, y, rel_step: float = 1e-6):
    """Central differences of ``problem.value``, step ``rel_step * max(1, |z_i|)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.concatenate([x, y])
    nx = x.size
    g = np.empty_like(z)
    for i in range(z.size):
        h = rel_step * max(1.0, abs(z[i]))
        zp = z.copy()
        zm = z.copy()
        zp[i] += h
        zm[i] -= h
        g[i] = (problem.value(zp[:nx], zp[nx:]) - problem.value(zm[:nx], zm[nx:])) / (2 * h)
    return g[:nx], g[nx:]
