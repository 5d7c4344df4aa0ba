"""Experiment configs, batch execution and artifact writing.

A config is a JSON document::

    {
      "name": "game200",
      "problem": {"kind": "matrix_game", "n": 200, "k": 200, "seed": 1},
      "geometry": "default",
      "noise": {"family": "multiplicative_normal", "levels": [0, 10, 20],
                "interpretation": "std"},
      "solver": {"iterations": 20000, "step": "first_order", "seeds": [0, 1, 2],
                 "tau": 0.001},
      "methods": ["zospa", "mirror_descent"],
      "output": {"dir": "out/game200"}
    }

Every run is a pure function of its sub-config, so artifacts are
reproducible byte for byte (wall-clock timings are only written when
``output.record_timing`` is set).
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ConfigurationError
from .geometry import default_geometry, make_geometry
from .zo_oracle import (
    GaussianNoise,
    MultiplicativeNormal,
    MultiplicativeUniform,
    NoiseModel,
    linear_saddle,
    resolve_tau_delta,
    sign_delta,
    sine_delta,
)
from .problems import (
    LagrangianQP,
    MatrixGame,
    MonkeySaddle,
    SeparableQuadratic,
    generate_section4_matrix,
    load_matrix_csv,
    resize_saddle,
    save_matrix_csv,
)
from .feasible_sets import Box, LpBall, Product, Simplex, resolve_shrink_plan
from .solvers import problem_M, run_chains

TRACE_FIELDS = ["method", "noise_pct", "seed", "iteration", "oracle_calls", "gap", "elapsed_s"]
AGGREGATE_FIELDS = ["method", "noise_pct", "iteration", "oracle_calls", "gap_mean", "gap_min", "gap_max", "seeds"]
METHODS = ("zospa", "mirror_descent")

DEFAULTS = {
    "name": "experiment",
    "geometry": "default",
    "noise": {"family": "none", "levels": [0], "interpretation": "std", "delta": None},
    "solver": {"iterations": 10000, "step": "theory", "seeds": [0], "record_every": None,
               "tau": "auto", "seeds_per_task": 8},
    "methods": ["zospa"],
    "shrink": None,
    "output": {"dir": "out", "plot": True, "record_timing": False, "x_axis": "iteration", "per_seed": False},
}

_ALLOWED = {
    "": {"name", "problem", "set", "geometry", "noise", "solver", "methods", "shrink", "output"},
    "noise": {"family", "levels", "interpretation", "delta"},
    "noise.delta": {"pattern", "Delta", "frequency", "seed", "direction", "phase"},
    "solver": {"iterations", "step", "seeds", "record_every", "tau", "seeds_per_task"},
    "shrink": {"eps", "neighborhood_defined"},
    "output": {"dir", "plot", "record_timing", "x_axis", "per_seed"},
    "problem": {"kind", "n", "k", "seed", "C", "path", "resize", "semidefinite", "half_width", "a", "b"},
    "problem.resize": {"row_factor", "saddle_factor", "row_offset"},
    "set": {"x", "y"},
}


class ConfigError(ConfigurationError):
    """Invalid experiment config; ``line`` points into the source text when known."""

    def __init__(self, message: str, path: str = "", line: Optional[int] = None):
        self.path = path
        self.line = line
        loc = f"line {line}: " if line else ""
        key = f"{path}: " if path else ""
        super().__init__(f"{loc}{key}{message}")


# --------------------------------------------------------------------------
# loading and validation


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _line_of(text: Optional[str], path: str) -> Optional[int]:
    """Best-effort line number of the last key of ``path`` in ``text``."""
    if not text or not path:
        return None
    key = path.split(".")[-1].split("[")[0]
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _check_keys(cfg: dict, text=None) -> None:
    for scope, allowed in _ALLOWED.items():
        node = cfg
        for part in filter(None, scope.split(".")):
            node = node.get(part) if isinstance(node, dict) else None
        if not isinstance(node, dict):
            continue
        extra = sorted(set(node) - allowed)
        if extra:
            path = f"{scope}.{extra[0]}" if scope else extra[0]
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(allowed))})", path, _line_of(text, path))


def normalize_config(raw: dict, text: Optional[str] = None) -> dict:
    """Fill defaults and check types; raises :class:`ConfigError`."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys(raw, text)
    if "problem" not in raw:
        raise ConfigError("missing required section", "problem")
    cfg = _merge(DEFAULTS, raw)

    def fail(msg, path):
        raise ConfigError(msg, path, _line_of(text, path))

    sv = cfg["solver"]
    if not isinstance(sv["iterations"], int) or sv["iterations"] < 1:
        fail("must be a positive integer", "solver.iterations")
    if not (sv["step"] in ("theory", "first_order") or (_is_number(sv["step"]) and sv["step"] > 0)):
        fail("must be 'theory', 'first_order' or a positive number", "solver.step")
    if not (isinstance(sv["seeds"], list) and sv["seeds"] and all(isinstance(s, int) for s in sv["seeds"])):
        fail("must be a nonempty list of integers", "solver.seeds")
    if len(set(sv["seeds"])) != len(sv["seeds"]):
        fail("seeds must be distinct", "solver.seeds")
    if sv["record_every"] is not None and not (isinstance(sv["record_every"], int) and sv["record_every"] > 0):
        fail("must be a positive integer or null", "solver.record_every")
    if not (sv["tau"] == "auto" or (_is_number(sv["tau"]) and sv["tau"] > 0)):
        fail("must be 'auto' or a positive number", "solver.tau")
    if not (isinstance(sv["seeds_per_task"], int) and sv["seeds_per_task"] > 0):
        fail("must be a positive integer", "solver.seeds_per_task")
    methods = cfg["methods"]
    if not (isinstance(methods, list) and methods and all(m in METHODS for m in methods)):
        fail(f"must be a nonempty list drawn from {list(METHODS)}", "methods")
    nz = cfg["noise"]
    if nz["family"] not in ("none", "gaussian", "multiplicative_normal", "multiplicative_uniform"):
        fail("unknown noise family", "noise.family")
    if not (isinstance(nz["levels"], list) and nz["levels"] and all(_is_number(v) and v >= 0 for v in nz["levels"])):
        fail("must be a nonempty list of nonnegative percentages", "noise.levels")
    if nz["interpretation"] not in ("std", "variance"):
        fail("must be 'std' or 'variance'", "noise.interpretation")
    if nz["family"] == "multiplicative_uniform" and any(v >= 100 for v in nz["levels"]):
        fail("uniform multiplicative noise needs levels below 100", "noise.levels")
    if nz["delta"] is not None:
        d = nz["delta"]
        if d.get("pattern") not in ("sine", "sign"):
            fail("must be 'sine' or 'sign'", "noise.delta.pattern")
        D = d.get("Delta")
        if not (D == "cap" or (_is_number(D) and D >= 0)):
            fail("must be 'cap' or a nonnegative number", "noise.delta.Delta")
        if D == "cap" and not cfg["shrink"]:
            fail("'cap' needs a shrink section with eps", "noise.delta.Delta")
        fr = d.get("frequency", 1.0)
        if not (fr == "tau" or (_is_number(fr) and fr > 0)):
            fail("must be 'tau' or a positive number", "noise.delta.frequency")
        direction = d.get("direction")
        if direction is not None and (not isinstance(direction, list) or not all(_is_number(v) for v in direction)
                                      or not any(direction)):
            fail("must be a nonzero list of numbers", "noise.delta.direction")
        if d.get("phase") is not None and not _is_number(d["phase"]):
            fail("must be a number", "noise.delta.phase")
    if cfg["geometry"] not in ("default", "entropy", "euclidean"):
        fail("must be 'default', 'entropy' or 'euclidean'", "geometry")
    sh = cfg["shrink"]
    if sh is not None:
        if not (_is_number(sh.get("eps")) and sh["eps"] > 0):
            fail("must be a positive number", "shrink.eps")
        sh.setdefault("neighborhood_defined", True)
        if not isinstance(sh["neighborhood_defined"], bool):
            fail("must be true or false", "shrink.neighborhood_defined")
    elif sv["tau"] == "auto":
        fail("'auto' needs a shrink section with eps", "solver.tau")
    out = cfg["output"]
    if out["x_axis"] not in ("iteration", "oracle_calls"):
        fail("must be 'iteration' or 'oracle_calls'", "output.x_axis")
    return cfg


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from None
    cfg = normalize_config(raw, text)
    base = os.path.dirname(os.path.abspath(path))
    prob = cfg["problem"]
    if "path" in prob and not os.path.isabs(prob["path"]):
        prob["path"] = os.path.join(base, prob["path"])
    return cfg


def dump_config(cfg: dict) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"


def config_hash(cfg: dict) -> str:
    """Hash of the experiment itself; where the artifacts go is not part of it."""
    body = copy.deepcopy(cfg)
    body.get("output", {}).pop("dir", None)
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# building blocks


def build_problem(spec: dict):
    kind = spec.get("kind")
    if kind == "matrix_game":
        game = generate_section4_matrix(int(spec.get("n", 200)), int(spec.get("k", spec.get("n", 200))),
                                        int(spec.get("seed", 0)))
        if spec.get("resize"):
            r = spec["resize"]
            game = resize_saddle(game, r["row_factor"], r["saddle_factor"], r.get("row_offset", 0.0))
        return game
    if kind == "matrix":
        if "C" in spec:
            return MatrixGame(np.array(spec["C"], dtype=float), {})
        if "path" in spec:
            return MatrixGame(load_matrix_csv(spec["path"]), {"path": spec["path"]})
        raise ConfigError("needs 'C' or 'path'", "problem")
    if kind == "linear":
        hw = float(spec.get("half_width", 1.0))
        a = np.asarray(spec.get("a", [1.0]), dtype=float)
        b = np.asarray(spec.get("b", [1.0]), dtype=float)
        return linear_saddle(a, b, Product(Box.cube(a.size, -hw, hw), Box.cube(b.size, -hw, hw)))
    if kind == "monkey":
        return MonkeySaddle(float(spec.get("half_width", 10.0)))
    if kind == "separable_quadratic":
        return SeparableQuadratic.random(int(spec.get("n", 10)), int(spec.get("seed", 0)))
    if kind == "lagrangian_qp":
        return LagrangianQP.random(int(spec.get("n", 10)), int(spec.get("k", 5)), int(spec.get("seed", 0)),
                                   bool(spec.get("semidefinite", False)))
    raise ConfigError(f"unknown problem kind {kind!r}", "problem.kind")


def build_leaf(spec: dict, dim: int):
    kind = spec.get("kind")
    if kind == "simplex":
        return Simplex(dim)
    if kind == "box":
        return Box.cube(dim, float(spec.get("lower", -1.0)), float(spec.get("upper", 1.0)))
    if kind == "ball":
        return LpBall(np.zeros(dim), float(spec.get("radius", 1.0)), float(spec.get("p", 2.0)))
    raise ConfigError(f"unknown set kind {kind!r}", "set")


def build_set(cfg: dict, problem) -> Product:
    spec = cfg.get("set")
    if not spec:
        return problem.feasible_set
    return Product(build_leaf(spec["x"], problem.n_x), build_leaf(spec["y"], problem.n_y))


def build_stochastic(family: str, level: float, interpretation: str):
    if family == "none" or level == 0:
        return None
    f = level / 100.0
    if family == "gaussian":
        return GaussianNoise(f)
    if family == "multiplicative_normal":
        return MultiplicativeNormal(f, interpretation)
    return MultiplicativeUniform(f)


@dataclass
class Plan:
    """Everything a run needs, resolved from a config without iterating."""

    problem: object
    original: Product
    operating: Product
    geometry: object
    tau: float
    domain: Optional[Product]
    M: float
    delta: Optional[object]
    alpha: float = 0.0
    notes: list = field(default_factory=list)


def resolve_plan(cfg: dict) -> Plan:
    """Build problem, sets, geometry and smoothing radius; checks module preconditions."""
    problem = build_problem(cfg["problem"])
    original = build_set(cfg, problem)
    if (original.left.dim, original.right.dim) != (problem.n_x, problem.n_y):
        raise ConfigError("set dimensions do not match the problem", "set")
    M = problem_M(problem, original)
    notes = []
    if isinstance(problem, (MonkeySaddle, SeparableQuadratic)):
        notes.append(f"unconstrained problem boxed to [-{problem.half_width:g}, {problem.half_width:g}]^n")
    sh = cfg["shrink"]
    operating, domain, alpha = original, None, 0.0
    tau = cfg["solver"]["tau"]
    Delta_cap = None
    if sh is not None:
        tau_c, Delta_cap = resolve_tau_delta(sh["eps"], M, original, sh["neighborhood_defined"])
        if not sh["neighborhood_defined"]:
            plan = resolve_shrink_plan(original, sh["eps"], M)
            alpha = plan.alpha
            operating = original.shrink(alpha)
            domain = original
            tau_c = min(tau_c, plan.tau_max)
            notes.append(f"shrunk set alpha={alpha:.6g} clearance={plan.tau_max:.6g} displacement={plan.r_bound:.6g}")
        if tau == "auto":
            tau = tau_c
    if domain is not None:
        clearance = original.clearance(alpha)
        if tau > clearance * (1 + 1e-12):
            raise ConfigError(f"tau={tau:.6g} exceeds the clearance {clearance:.6g} of the shrunk set", "solver.tau")
    kind = cfg["geometry"]
    try:
        geometry = default_geometry(operating) if kind == "default" else make_geometry(kind, operating)
    except ConfigurationError as exc:
        raise ConfigError(str(exc), "geometry") from None
    delta = None
    d = cfg["noise"]["delta"]
    if d is not None:
        Delta = Delta_cap if d["Delta"] == "cap" else float(d["Delta"])
        if d["pattern"] == "sine":
            freq = d.get("frequency", 1.0)
            freq = 1.08 / tau if freq == "tau" else float(freq)
            direction = d.get("direction")
            if direction is not None and len(direction) != original.dim:
                raise ConfigError(f"needs {original.dim} entries", "noise.delta.direction")
            delta = sine_delta(Delta, problem.n_x, problem.n_y, freq, int(d.get("seed", 0)),
                               direction=direction, phase=d.get("phase"))
        else:
            rng = np.random.default_rng(int(d.get("seed", 0)))
            u = rng.standard_normal(original.dim)
            delta = sign_delta(Delta, u / np.linalg.norm(u), operating.center())
    for m in cfg["methods"]:
        if m == "mirror_descent" and not getattr(problem, "has_gradient", True):
            raise ConfigError("mirror descent needs an analytic gradient", "methods")
    fam = cfg["noise"]["family"]
    if fam.startswith("multiplicative") and not isinstance(problem, MatrixGame):
        raise ConfigError("matrix noise needs a matrix game", "noise.family")
    return Plan(problem, original, operating, geometry, float(tau), domain, M, delta, alpha, notes)


# --------------------------------------------------------------------------
# execution


def _tasks(cfg: dict):
    """(method, level, seed chunk) triples in output order."""
    sv = cfg["solver"]
    seeds = sv["seeds"]
    k = sv["seeds_per_task"]
    chunks = [seeds[i:i + k] for i in range(0, len(seeds), k)]
    out = []
    for method in cfg["methods"]:
        levels = cfg["noise"]["levels"] if method == "zospa" else [0]
        for level in levels:
            for ch in chunks:
                out.append((method, level, ch))
    return out


def run_task(cfg: dict, method: str, level: float, seeds: list):
    """One vectorized batch of seeds; returns ``(rows, error)``."""
    try:
        plan = resolve_plan(cfg)
        sv = cfg["solver"]
        nz = cfg["noise"]
        noise = NoiseModel(build_stochastic(nz["family"], level, nz["interpretation"]), plan.delta)
        step = sv["step"]
        results = run_chains(plan.problem, plan.operating, plan.geometry, method=method,
                             iterations=sv["iterations"], seeds=seeds, step=step, noise=noise,
                             tau=plan.tau, record_every=sv["record_every"], domain=plan.domain,
                             gap_set=plan.original, M=plan.M)
    except Exception as exc:  # a failed batch must not take the whole experiment down
        return [], f"{method} noise={level} seeds={seeds}: {type(exc).__name__}: {exc}"
    timing = cfg["output"]["record_timing"]
    rows = []
    for res in results:
        for rec in res.trace:
            rows.append((method, level, res.seed, rec.iteration, rec.oracle_calls, rec.gap,
                         rec.elapsed if timing else math.nan))
    return rows, None


def _fmt(v) -> str:
    # repr round-trips floats exactly, which keeps reruns byte-identical
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_traces(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def aggregate(rows):
    groups = {}
    for method, level, seed, it, calls, gap, _ in rows:
        groups.setdefault((method, level, it), []).append((calls, gap))
    out = []
    for (method, level, it), vals in groups.items():
        gaps = np.array([g for _, g in vals])
        out.append((method, level, it, vals[0][0], float(gaps.mean()), float(gaps.min()), float(gaps.max()), len(vals)))
    return out


def write_aggregate(path, agg) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(AGGREGATE_FIELDS)
        for r in agg:
            w.writerow([_fmt(v) for v in r])


def read_traces(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames != TRACE_FIELDS:
            raise ConfigError(f"{path} is not a trace file (header {rd.fieldnames})")
        for r in rd:
            rows.append((r["method"], float(r["noise_pct"]), int(r["seed"]), int(r["iteration"]),
                         int(r["oracle_calls"]), float(r["gap"]), float(r["elapsed_s"])))
    return rows


@dataclass
class ExperimentResult:
    out_dir: str
    traces_path: str
    aggregate_path: str
    plot_path: Optional[str]
    errors: list


def run_experiment(cfg: dict, jobs: int = 1) -> ExperimentResult:
    """Run every (method, noise level, seed batch) of ``cfg`` and write the artifacts."""
    plan = resolve_plan(cfg)  # configuration problems surface before any iteration
    out_dir = cfg["output"]["dir"]
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_config(cfg))
    if isinstance(plan.problem, MatrixGame):
        save_matrix_csv(os.path.join(out_dir, "matrix.csv"), plan.problem.C)
    tasks = _tasks(cfg)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_task, [cfg] * len(tasks), *zip(*tasks)))
    else:
        results = [run_task(cfg, *t) for t in tasks]
    rows, errors = [], []
    for r, err in results:
        rows.extend(r)
        if err:
            errors.append(err)
    traces_path = os.path.join(out_dir, "traces.csv")
    agg_path = os.path.join(out_dir, "aggregate.csv")
    write_traces(traces_path, rows)
    agg = aggregate(rows)
    write_aggregate(agg_path, agg)
    err_path = os.path.join(out_dir, "errors.txt")
    if errors:
        with open(err_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(errors) + "\n")
    elif os.path.exists(err_path):
        os.remove(err_path)
    plot_path = None
    if cfg["output"]["plot"] and agg:
        from .plotting import plot_aggregate

        plot_path = os.path.join(out_dir, "gap.svg")
        if cfg["output"]["per_seed"]:
            agg = aggregate([(f"{r[0]} seed {r[2]}",) + tuple(r[1:]) for r in rows])
        plot_aggregate(agg, plot_path, title=cfg["name"], x_axis=cfg["output"]["x_axis"],
                       provenance={"config_sha256_16": config_hash(cfg), "seeds": cfg["solver"]["seeds"],
                                   "notes": plan.notes})
    return ExperimentResult(out_dir, traces_path, agg_path, plot_path, errors)


def validate(cfg: dict) -> list:
    """Dry run: resolve everything and return human-readable diagnostics."""
    plan = resolve_plan(cfg)
    from .solvers import first_order_step, theory_step

    sv = cfg["solver"]
    lines = [
        f"problem: {type(plan.problem).__name__} n_x={plan.problem.n_x} n_y={plan.problem.n_y} M={plan.M:.6g}",
        f"geometry: {plan.geometry.kind} Omega={plan.geometry.omega:.6g} a_q^2={plan.geometry.a_q_sq:.6g}",
        f"tau={plan.tau:.6g} Delta={0.0 if plan.delta is None else plan.delta.bound:.6g}",
        f"tasks: {len(_tasks(cfg))}",
    ]
    if sv["step"] == "theory" and "zospa" in cfg["methods"]:
        Delta = 0.0 if plan.delta is None else plan.delta.bound
        lines.append(f"zospa theory step: {theory_step(plan.geometry, plan.operating, plan.M, plan.tau, Delta, sv['iterations']):.6g}")
    if sv["step"] == "first_order" or "mirror_descent" in cfg["methods"]:
        lines.append(f"first-order step: {first_order_step(plan.problem, plan.geometry, sv['iterations']):.6g}")
    lines.extend(plan.notes)
    return lines
